from logging.config import fileConfig

from sqlalchemy import engine_from_config, pool

from alembic import context
from db.models import Base
from db.session import DEFAULT_DB_URL, resolve_db_url

# this is the Alembic Config object, which provides
# access to the values within the .ini file in use.
config = context.config

# Interpret the config file for Python logging.
fileConfig(config.config_file_name)

target_metadata = Base.metadata


def get_url():
    """Resolve the SQLAlchemy URL for migrations.

    Precedence:
    1) URL set on the Alembic Config (bootstrap_db.py sets it from --db-url)
    2) Environment variable KGD_DB_URL
    3) Project default SQLite path
    """
    cfg_url = (config.get_main_option('sqlalchemy.url') or '').strip()
    if cfg_url and cfg_url != DEFAULT_DB_URL:
        return resolve_db_url(cfg_url)
    return resolve_db_url()


def run_migrations_offline():
    context.configure(
        url=get_url(),
        target_metadata=target_metadata,
        literal_binds=True,
        dialect_opts={"paramstyle": "named"},
        render_as_batch=True,
        compare_type=True,
    )

    with context.begin_transaction():
        context.run_migrations()


def run_migrations_online():
    configuration = config.get_section(config.config_ini_section)
    configuration['sqlalchemy.url'] = get_url()
    connectable = engine_from_config(
        configuration,
        prefix='sqlalchemy.',
        poolclass=pool.NullPool,
    )

    with connectable.connect() as connection:
        # SQLite cannot ALTER most columns in place
        context.configure(
            connection=connection,
            target_metadata=target_metadata,
            render_as_batch=connection.dialect.name == "sqlite",
            compare_type=True,
        )

        with context.begin_transaction():
            context.run_migrations()


if context.is_offline_mode():
    run_migrations_offline()
else:
    run_migrations_online()
