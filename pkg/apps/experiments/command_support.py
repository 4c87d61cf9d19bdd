"""
Shared plumbing for the experiment management commands.

Exit codes: 1 missing file, 2 invalid config or input document, 3 any other failure.
"""
import logging
from contextlib import contextmanager
from typing import List

from django.core.management.base import CommandError
from pydantic import ValidationError

from apps.core.exceptions import ConfigNotFoundError, DatasetParseError, InvalidConfigError
from apps.core.schemas import as_config_error

logger = logging.getLogger(__name__)

EXIT_MISSING_FILE = 1
EXIT_INVALID_CONFIG = 2
EXIT_RUNTIME = 3


@contextmanager
def exit_codes():
    """Translate domain errors raised inside the block into CommandError return codes."""
    try:
        yield
    except CommandError:
        raise
    except (ConfigNotFoundError, FileNotFoundError) as e:
        raise CommandError(str(e), returncode=EXIT_MISSING_FILE)
    except ValidationError as e:
        raise CommandError(str(as_config_error(e)), returncode=EXIT_INVALID_CONFIG)
    except (InvalidConfigError, DatasetParseError) as e:
        raise CommandError(str(e), returncode=EXIT_INVALID_CONFIG)
    except Exception as e:
        logger.exception(f"Command failed: {e}")
        raise CommandError(f"{type(e).__name__}: {e}", returncode=EXIT_RUNTIME)


def split_list(text: str) -> List[str]:
    return [part.strip() for part in text.split(',') if part.strip()]


def parse_seeds(text: str) -> List[int]:
    seeds = []
    for part in split_list(text):
        try:
            seed = int(part)
        except ValueError:
            raise InvalidConfigError(f"seed {part!r} is not an integer", field="sweep.seeds")
        if not 0 <= seed < 2**64:
            raise InvalidConfigError(f"seed {seed} out of range", field="sweep.seeds")
        seeds.append(seed)
    return seeds
