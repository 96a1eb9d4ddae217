"""
Logger configurable para hmmqp
Un logger raíz "hmmqp" con handlers; los módulos usan hijos "hmmqp.<módulo>"
"""
import logging
import sys
from datetime import datetime
from pathlib import Path
from typing import Optional

ROOT_LOGGER = "hmmqp"
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


class RunLogger:
    """Cache de loggers por nombre, reutilizable entre CLI, benchmark y tests"""

    _loggers = {}

    @classmethod
    def get_logger(cls, name: str = ROOT_LOGGER, log_dir: Optional[Path] = None, level: str = "INFO"):
        """
        Obtiene o crea un logger

        Args:
            name: "hmmqp" o un hijo "hmmqp.qp"; otros nombres se configuran aparte
            log_dir: Directorio para el archivo de log (opcional)
            level: Nivel de logging (DEBUG, INFO, WARNING, ERROR)

        Returns:
            Logger configurado
        """
        if name in cls._loggers:
            return cls._loggers[name]

        logger = logging.getLogger(name)

        # Los hijos no llevan handlers propios, propagan al raíz del paquete
        if name.startswith(ROOT_LOGGER + "."):
            cls.get_logger(ROOT_LOGGER, level=level)
            cls._loggers[name] = logger
            return logger

        logger.setLevel(getattr(logging, level.upper()))

        if logger.handlers:
            cls._loggers[name] = logger
            return logger

        formatter = logging.Formatter(LOG_FORMAT, datefmt='%Y-%m-%d %H:%M:%S')

        # Consola en stderr: stdout queda libre para la salida de la CLI
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(getattr(logging, level.upper()))
        console_handler.setFormatter(formatter)
        logger.addHandler(console_handler)

        if log_dir:
            log_dir = Path(log_dir)
            log_dir.mkdir(parents=True, exist_ok=True)

            log_file = log_dir / f"{name}_{datetime.now().strftime('%Y%m%d')}.log"
            file_handler = logging.FileHandler(log_file, encoding='utf-8')
            file_handler.setLevel(getattr(logging, level.upper()))
            file_handler.setFormatter(formatter)
            logger.addHandler(file_handler)

            logger.info(f"Logs guardándose en: {log_file}")

        cls._loggers[name] = logger
        return logger

    @classmethod
    def reset_logger(cls, name: str = ROOT_LOGGER):
        """Quita handlers y borra el logger del cache (útil para tests y la CLI)"""
        if name in cls._loggers:
            logger = cls._loggers[name]
            for handler in logger.handlers[:]:
                handler.close()
                logger.removeHandler(handler)
            del cls._loggers[name]


def get_logger(name: str = ROOT_LOGGER, log_dir: Optional[Path] = None, level: str = "INFO"):
    """Wrapper conveniente para obtener logger"""
    return RunLogger.get_logger(name, log_dir, level)


def configure_logging(level: str = "INFO", log_dir: Optional[Path] = None):
    """Reconfigura el logger raíz (nivel y archivo) para una ejecución"""
    RunLogger.reset_logger(ROOT_LOGGER)
    return RunLogger.get_logger(ROOT_LOGGER, log_dir, level)
