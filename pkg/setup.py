#!/usr/bin/env python3
"""
PEAS-lab Setup Script - installs dependencies and checks the environment
Usage: python setup.py
"""

import subprocess
import sys
from pathlib import Path

# Get project root
PROJECT_ROOT = Path(__file__).parent

# Add project root to Python path for imports
sys.path.insert(0, str(PROJECT_ROOT))

# Initialize logging early
from src.utils.logger import setup_logging, get_logger
setup_logging()
logger = get_logger(__name__)
# Check Python version
if sys.version_info < (3, 10):
    logger.error("Python 3.10+ is required.")
    sys.exit(1)


def check_dependencies_installed() -> bool:
    """
    Check if all required dependencies are already installed by trying to import them.

    Returns:
        bool: True if all dependencies are installed, False otherwise.
    """
    try:
        import dotenv
        import numpy
        import scipy
        import skimage
        import yaml
        return True
    except ImportError:
        return False


def install_requirements() -> bool:
    """Install requirements.txt with the running interpreter's pip."""
    logger.info("📦 Installing Python dependencies... This may take a moment ⏳")
    result = subprocess.run(
        [sys.executable, "-m", "pip", "install", "-r", str(PROJECT_ROOT / "requirements.txt")],
        check=False,
        capture_output=True,
        text=True,
    )
    if result.returncode != 0:
        logger.error("❌ pip install failed:")
        logger.error(result.stderr)
        return False
    logger.info("✅ Dependencies installed.")
    return True


def main():
    """Run the PEAS-lab setup process.

    Installs missing Python dependencies, validates the logging environment
    and prints next steps for running the experiments.
    """
    logger.info("PEAS-lab Setup")
    logger.info("=" * 50)

    if check_dependencies_installed():
        logger.info("✅ Python dependencies already installed.")
    elif not install_requirements():
        return

    env_file = PROJECT_ROOT / ".env"
    if env_file.exists():
        logger.info("🔍 Validating environment configuration...")
        from src.utils.config_validator import validate_logging_config
        is_valid, error = validate_logging_config()
        if is_valid:
            logger.info("✅ Environment configuration validated successfully!")
        else:
            logger.warning("⚠️  Configuration issue detected:")
            logger.warning("   %s", error)

    logger.info("🎉 Setup completed successfully! 🎉")
    logger.info("🔗 Next steps:")
    if not env_file.exists():
        logger.info("1. Optionally copy .env.example to .env and adjust workers and logging")
        logger.info("2. Run one of the following commands:")
    else:
        logger.info("Run one of the following commands:")
    logger.info("   • python src/pipeline.py train-zoo -c data/configs/desk.json   # Train the model zoo")
    logger.info("   • python src/pipeline.py peas -c data/configs/desk.json        # BTA vs. BTA-PEAS on every pair")
    logger.info("   • python src/pipeline.py sweep-n -c data/configs/tiny.json     # Quick exploration-size sweep")


if __name__ == "__main__":
    if len(sys.argv) > 1:
        # Invoked by a build frontend (pip/setuptools): metadata lives in pyproject.toml.
        from setuptools import setup
        setup()
    else:
        main()
