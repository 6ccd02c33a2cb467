# app/database.py

from sqlalchemy import create_engine
from sqlalchemy.orm import declarative_base, sessionmaker

from app.config import settings

# 実行記録 DB の URL（.env の DATABASE_URL、既定は SQLite）
DATABASE_URL = settings.DATABASE_URL

# SQLite はスレッド間共有を許可する（play の並列実行から記録するため）
connect_args = {"check_same_thread": False} if DATABASE_URL.startswith("sqlite") else {}

# SQLAlchemyエンジンの作成
engine = create_engine(DATABASE_URL, echo=False, connect_args=connect_args)  # echo=Trueでデバッグ用SQL表示

# セッションメーカーの作成
SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=engine)

# ベースクラスの作成
Base = declarative_base()


def init_db(bind=None):
    """データベース初期化（テーブル作成）"""
    # 循環参照を避けるため関数内でインポート
    from app.models.run_record import PlayRun, SolveRun  # noqa: F401

    Base.metadata.create_all(bind=bind or engine)
