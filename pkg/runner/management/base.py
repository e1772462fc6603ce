import json
import logging
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError
from django.core.serializers.json import DjangoJSONEncoder
from rest_framework.exceptions import ValidationError

from qunlearn.exceptions import ConfigError
from runner.config import ExperimentConfig
from runner.service import ExperimentService, load_config

logger = logging.getLogger(__name__)


class ExperimentCommand(BaseCommand):
    """
    Shared ``--config/--seed/--out`` handling.

    Configuration problems exit with status 2, every other failure with 1.
    """
    requires_system_checks = []

    def add_arguments(self, parser):
        parser.add_argument('--config', required=True, help='Path to a YAML experiment file')
        parser.add_argument('--seed', type=int, help='Run this seed only (default: the seeds of the config)')
        parser.add_argument('--out', help='Output directory (default: output_dir of the config)')

    def handle(self, *args, **options):
        try:
            config = load_config(options['config'], options.get('out'))
            if options.get('seed') is not None:
                config = config.with_seeds([options['seed']])
            self.execute_experiment(config, ExperimentService(), options)
        except CommandError:
            raise
        except (ConfigError, ValidationError) as e:
            raise CommandError(str(e), returncode=2)
        except Exception as e:
            logger.error(f"{self.__module__.rsplit('.', 1)[-1]} failed: {str(e)}")
            raise CommandError(f"{type(e).__name__}: {str(e)}", returncode=1)

    def execute_experiment(self, config: ExperimentConfig, service: ExperimentService, options: dict):
        raise NotImplementedError('subclasses of ExperimentCommand must provide execute_experiment()')

    def write_json(self, path: Path, payload) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, cls=DjangoJSONEncoder, indent=2))
        return path
