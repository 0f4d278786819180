"""results database initial schema

Revision ID: 0001_results_initial
Revises:
Create Date: 2026-10-16T09:00:00
"""

import sqlalchemy as sa

from alembic import op

revision = '0001_results_initial'
down_revision = None
branch_labels = None
depends_on = None


def _has_table(name: str) -> bool:
    insp = sa.inspect(op.get_bind())
    return name in insp.get_table_names()


def upgrade():
    if not _has_table('benchmark_run'):
        op.create_table(
            'benchmark_run',
            sa.Column('id', sa.Integer(), primary_key=True),
            sa.Column('scenario', sa.String(length=16), nullable=False),
            sa.Column('master_seed', sa.Integer(), nullable=False),
            sa.Column('reps', sa.Integer(), nullable=False),
            sa.Column('n_grid', sa.JSON(), nullable=True),
            sa.Column('rules', sa.JSON(), nullable=True),
            sa.Column('config', sa.JSON(), nullable=True),
        )
        op.create_index('ix_benchmark_run_id', 'benchmark_run', ['id'])
        op.create_index('ix_benchmark_run_scenario', 'benchmark_run', ['scenario'])

    if not _has_table('rep_outcome'):
        op.create_table(
            'rep_outcome',
            sa.Column('id', sa.Integer(), primary_key=True),
            sa.Column('run_id', sa.Integer(), sa.ForeignKey('benchmark_run.id', ondelete='CASCADE'), nullable=False),
            sa.Column('n', sa.Integer(), nullable=False),
            sa.Column('rep', sa.Integer(), nullable=False),
            sa.Column('rule', sa.String(length=16), nullable=False),
            sa.Column('t_hat', sa.Integer(), nullable=True),
            sa.Column('test_mse', sa.Float(), nullable=True),
            sa.Column('oracle_distance', sa.Float(), nullable=True),
            sa.Column('truncated', sa.Boolean(), nullable=True),
            sa.Column('constant', sa.Float(), nullable=True),
            sa.Column('error', sa.Text(), nullable=True),
            sa.UniqueConstraint('run_id', 'n', 'rep', 'rule', name='uq_rep_outcome_cell_rule'),
        )
        op.create_index('ix_rep_outcome_id', 'rep_outcome', ['id'])
        op.create_index('ix_rep_outcome_run_id', 'rep_outcome', ['run_id'])
        op.create_index('ix_rep_outcome_rule', 'rep_outcome', ['rule'])


def downgrade():
    op.drop_table('rep_outcome')
    op.drop_table('benchmark_run')
