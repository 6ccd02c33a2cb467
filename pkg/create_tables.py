"""実行記録テーブルを作成するスクリプト"""
import sys
import os

# プロジェクトのルートディレクトリをPythonパスに追加
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from app.database import DATABASE_URL, init_db

if __name__ == "__main__":
    print(f"実行記録テーブルを作成中... ({DATABASE_URL})")
    init_db()
    print("完了！")
