"""
Logging utilities for solver runs
"""
import logging
import os
from datetime import datetime, timezone
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Optional, Tuple

from app.config import settings

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(name)s - %(message)s'


class RunLogHandler(logging.Handler):
    """Keeps records in memory and optionally mirrors them to a rotating file"""

    def __init__(self, log_file_path: Optional[str] = None):
        super().__init__()
        self.log_file_path = log_file_path
        self.logs = []
        self.file_handler = None
        if log_file_path:
            self.file_handler = RotatingFileHandler(
                log_file_path,
                maxBytes=10 * 1024 * 1024,  # 10MB
                backupCount=5
            )
            self.file_handler.setFormatter(logging.Formatter(LOG_FORMAT))

    def emit(self, record):
        msg = self.format(record)
        self.logs.append({
            'timestamp': datetime.now(timezone.utc).isoformat(),
            'level': record.levelname,
            'message': msg
        })
        if self.file_handler:
            self.file_handler.emit(record)

    def get_logs(self, limit: Optional[int] = None):
        """Get stored logs"""
        if limit:
            return self.logs[-limit:]
        return self.logs

    def close(self):
        if self.file_handler:
            self.file_handler.close()
        super().close()


def _resolve_log_dir(log_dir: Optional[str]) -> Optional[str]:
    """Writable log directory, or None when file logging is off or impossible"""
    log_dir = log_dir or settings.log_dir
    if not log_dir:
        return None
    try:
        os.makedirs(log_dir, exist_ok=True)
        test_file = os.path.join(log_dir, ".test_write")
        with open(test_file, 'w') as f:
            f.write("test")
        os.remove(test_file)
    except (OSError, PermissionError):
        logging.getLogger(__name__).warning(f"Log directory {log_dir} is not writable; logging to memory only")
        return None
    return log_dir


def setup_run_logger(run_label: str, log_dir: Optional[str] = None) -> Tuple[logging.Logger, Optional[str]]:
    """
    Set up the logger for one solver run.

    Records from the whole app package are collected by the run handler,
    so assembly and Newton messages end up in the same run log.

    Returns:
        tuple: (logger, log_file_path or None)
    """
    log_dir = _resolve_log_dir(log_dir)
    log_file_path = None
    if log_dir:
        timestamp = datetime.now(timezone.utc).strftime('%Y%m%d_%H%M%S')
        safe_label = "".join(c if c.isalnum() or c in "-_" else "_" for c in run_label)
        log_file_path = str(Path(log_dir) / f"run_{safe_label}_{timestamp}.log")

    level = getattr(logging, settings.log_level.upper(), logging.INFO)

    logger = logging.getLogger(f"run.{run_label}")
    logger.setLevel(level)
    logger.handlers = []

    handler = RunLogHandler(log_file_path)
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logger.addHandler(handler)

    # Route library records (app.*) through the same handler
    app_logger = logging.getLogger("app")
    app_logger.setLevel(level)
    for old in [h for h in app_logger.handlers if isinstance(h, RunLogHandler)]:
        app_logger.removeHandler(old)
        old.close()
    app_logger.addHandler(handler)

    logger._run_handler = handler

    return logger, log_file_path


def get_run_logger(run_label: str) -> Optional[logging.Logger]:
    """Get an existing run logger"""
    logger = logging.getLogger(f"run.{run_label}")
    if hasattr(logger, '_run_handler'):
        return logger
    return None
