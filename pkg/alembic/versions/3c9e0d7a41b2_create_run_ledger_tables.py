"""Create run ledger tables

Revision ID: 3c9e0d7a41b2
Revises: 
Create Date: 2026-10-17 10:12:40.118304

"""
from typing import Sequence, Union

from alembic import op
import sqlalchemy as sa


# revision identifiers, used by Alembic.
revision: str = '3c9e0d7a41b2'
down_revision: Union[str, None] = None
branch_labels: Union[str, Sequence[str], None] = None
depends_on: Union[str, Sequence[str], None] = None


def upgrade() -> None:
    op.create_table('solve_runs',
    sa.Column('id', sa.Integer(), nullable=False),
    sa.Column('family', sa.String(length=50), nullable=True),
    sa.Column('params', sa.JSON(), nullable=True),
    sa.Column('game_hash', sa.String(length=40), nullable=False),
    sa.Column('n_states', sa.Integer(), nullable=False),
    sa.Column('n_transitions', sa.Integer(), nullable=False),
    sa.Column('epsilon', sa.Float(), nullable=False),
    sa.Column('final_gap', sa.Float(), nullable=False),
    sa.Column('lower_value', sa.Float(), nullable=False),
    sa.Column('upper_value', sa.Float(), nullable=False),
    sa.Column('trials', sa.Integer(), nullable=True),
    sa.Column('updates', sa.Integer(), nullable=True),
    sa.Column('gamma_size', sa.Integer(), nullable=True),
    sa.Column('upsilon_size', sa.Integer(), nullable=True),
    sa.Column('timing', sa.JSON(), nullable=True),
    sa.Column('budget_exceeded', sa.Boolean(), nullable=True),
    sa.Column('created_at', sa.DateTime(timezone=True), server_default=sa.text('(CURRENT_TIMESTAMP)'), nullable=True),
    sa.PrimaryKeyConstraint('id')
    )
    op.create_index(op.f('ix_solve_runs_id'), 'solve_runs', ['id'], unique=False)
    op.create_index(op.f('ix_solve_runs_game_hash'), 'solve_runs', ['game_hash'], unique=False)
    op.create_table('play_runs',
    sa.Column('id', sa.Integer(), nullable=False),
    sa.Column('game_hash', sa.String(length=40), nullable=False),
    sa.Column('mode', sa.String(length=20), nullable=False),
    sa.Column('episodes', sa.Integer(), nullable=False),
    sa.Column('horizon', sa.Integer(), nullable=False),
    sa.Column('mean', sa.Float(), nullable=False),
    sa.Column('standard_error', sa.Float(), nullable=False),
    sa.Column('min_payoff', sa.Float(), nullable=True),
    sa.Column('max_payoff', sa.Float(), nullable=True),
    sa.Column('truncation', sa.Float(), nullable=True),
    sa.Column('verdict', sa.String(length=10), nullable=True),
    sa.Column('created_at', sa.DateTime(timezone=True), server_default=sa.text('(CURRENT_TIMESTAMP)'), nullable=True),
    sa.PrimaryKeyConstraint('id')
    )
    op.create_index(op.f('ix_play_runs_id'), 'play_runs', ['id'], unique=False)
    op.create_index(op.f('ix_play_runs_game_hash'), 'play_runs', ['game_hash'], unique=False)


def downgrade() -> None:
    op.drop_index(op.f('ix_play_runs_game_hash'), table_name='play_runs')
    op.drop_index(op.f('ix_play_runs_id'), table_name='play_runs')
    op.drop_table('play_runs')
    op.drop_index(op.f('ix_solve_runs_game_hash'), table_name='solve_runs')
    op.drop_index(op.f('ix_solve_runs_id'), table_name='solve_runs')
    op.drop_table('solve_runs')
