from datetime import datetime
import logging

from sqlalchemy import create_engine, Column, Integer, String, Float, DateTime, JSON
from sqlalchemy.orm import declarative_base, sessionmaker

from config import DATABASE_URL

logger = logging.getLogger(__name__)

Base = declarative_base()

engine = None
SessionLocal = None


class RunRecord(Base):
    __tablename__ = 'run_history'

    id = Column(Integer, primary_key=True, index=True)
    timestamp = Column(DateTime, default=datetime.now, index=True)
    command = Column(String, index=True)
    seed = Column(Integer)
    config = Column(JSON, default={})
    tool_version = Column(String)
    wall_time = Column(Float)
    output_paths = Column(JSON, default=[])
    exit_code = Column(Integer)


def configure_engine(url=None):
    """Bind the ledger to `url` (default STEGCAP_DATABASE_URL). Returns None when unset."""
    global engine, SessionLocal
    url = url or DATABASE_URL
    if not url:
        engine, SessionLocal = None, None
        return None
    engine = create_engine(url, echo=False)
    SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=engine)
    return engine


def ledger_enabled() -> bool:
    return SessionLocal is not None


def init_db():
    if engine is None:
        return False
    try:
        Base.metadata.create_all(bind=engine)
        logger.info("✅ Run ledger tables created successfully")
        return True
    except Exception as e:
        logger.error(f"❌ Error creating run ledger tables: {e}")
        return False


def add_run_to_db(run_data):
    if SessionLocal is None:
        return False
    db = SessionLocal()
    try:
        run = RunRecord(**run_data)
        db.add(run)
        db.commit()
        logger.info(f"✅ Run saved to ledger: {run_data['command']} exit={run_data.get('exit_code')}")
        return True
    except Exception as e:
        logger.error(f"❌ Error saving run: {e}")
        db.rollback()
        return False
    finally:
        db.close()


def get_run_history(command=None, limit=50):
    if SessionLocal is None:
        return []
    db = SessionLocal()
    try:
        query = db.query(RunRecord).order_by(RunRecord.timestamp.desc())
        if command:
            query = query.filter(RunRecord.command == command)
        return query.limit(limit).all()
    except Exception as e:
        logger.error(f"❌ Error fetching run history: {e}")
        return []
    finally:
        db.close()
