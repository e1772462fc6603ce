from django.core.management.base import BaseCommand, CommandError

from runner.gradcheck import run_gradcheck


class Command(BaseCommand):
    help = 'Cross-check adjoint, parameter-shift and finite-difference gradients'
    requires_system_checks = []

    def add_arguments(self, parser):
        parser.add_argument('--circuits', type=int, default=20, help='Random circuits to check')
        parser.add_argument('--seed', type=int, default=0)
        # accepted for a uniform command line, unused here
        parser.add_argument('--config', help='Ignored')
        parser.add_argument('--out', help='Ignored')

    def handle(self, *args, **options):
        checks = run_gradcheck(options['circuits'], options['seed'])
        failed = [check for check in checks if not check.passed]
        for check in failed:
            self.stderr.write(f"FAIL {check.name}: {check.error:.3e} > {check.tolerance:.0e}")
        if failed:
            raise CommandError(f"{len(failed)} of {len(checks)} gradient checks failed", returncode=1)
        self.stdout.write(self.style.SUCCESS(f"All {len(checks)} gradient checks passed"))
