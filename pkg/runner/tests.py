import io
import json
import tempfile
from dataclasses import replace
from functools import lru_cache
from pathlib import Path
from unittest import skipUnless
from unittest.mock import patch

import numpy as np
import pandas as pd
import pytest
from django.apps import apps
from django.conf import settings
from django.test import SimpleTestCase

from data.sets import ForgetSpec
from hybrid.model import group_parameters, output_groups
from qunlearn.exceptions import ConfigError
from train.config import TrainConfig
from train.loop import set_accuracy
from unlearn.config import METHOD_IDS, UnlearnConfig
from unlearn.methods import run_method as real_run_method
from .cli import cli_main
from .config import ExperimentConfig
from .gradcheck import GradCheck, circuit_checks, model_checks
from .reports import CSV_COLUMNS, emit_report, report_frame
from .serializers import ExperimentConfigSerializer
from .service import ExperimentService, load_config

SMALL_YAML = """
dataset: iris
scenario:
  variant: {variant}
  {scenario_key}: {scenario_value}
methods: [{methods}]
seeds: [0]
train:
  max_epochs: 3
  lr: 0.01
unlearn:
  max_epochs: 2
  patience: 2
"""


def small_config(methods=METHOD_IDS, full_class=False):
    scenario = ForgetSpec.full_class(2) if full_class else ForgetSpec.subset(0.1)
    return ExperimentConfig(
        dataset='iris',
        scenario=scenario,
        methods=tuple(methods),
        seeds=(0,),
        train=TrainConfig.for_dataset('iris', max_epochs=3, lr=0.01),
        unlearn=UnlearnConfig.for_dataset('iris', max_epochs=2, patience=2),
    )


def small_yaml(methods=('GA',), full_class=False):
    if full_class:
        return SMALL_YAML.format(variant='full_class', scenario_key='class_id', scenario_value=2,
                                 methods=', '.join(methods))
    return SMALL_YAML.format(variant='subset', scenario_key='fraction', scenario_value=0.1,
                             methods=', '.join(methods))


@lru_cache(maxsize=None)
def small_record(methods=METHOD_IDS, full_class=False):
    return ExperimentService(threads=2).run_experiment(small_config(methods, full_class), progress=False)


class ConfigHashTest(SimpleTestCase):
    def setUp(self):
        """Set up a scratch directory for config files"""
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.dir = Path(self.tmp.name)

    def write(self, name, text):
        path = self.dir / name
        path.write_text(text)
        return path

    def test_hash_ignores_key_order(self):
        first = self.write('a.yaml', 'dataset: iris\nscenario: {variant: subset, fraction: 0.1}\nseeds: [0]\n')
        second = self.write('b.yaml', 'seeds: [0]\nscenario: {fraction: 0.1, variant: subset}\ndataset: iris\n')
        self.assertEqual(load_config(first).config_hash, load_config(second).config_hash)

    def test_hash_ignores_output_dir(self):
        config = small_config()
        self.assertEqual(config.config_hash, config.with_output_dir(self.dir / 'elsewhere').config_hash)

    def test_hash_tracks_settings_that_change_results(self):
        config = small_config()
        other = ExperimentConfig(dataset='iris', scenario=config.scenario, methods=config.methods, seeds=(0,),
                                 train=config.train, unlearn=UnlearnConfig.for_dataset('iris', max_epochs=2,
                                                                                       patience=2, lr=1e-3))
        self.assertNotEqual(config.config_hash, other.config_hash)
        self.assertNotEqual(config.config_hash, config.with_seeds([1]).config_hash)

    def test_defaults_resolved_before_hashing(self):
        """Spelling out a default gives the same hash as leaving it out."""
        bare = self.write('bare.yaml', 'dataset: iris\nscenario: {variant: subset, fraction: 0.1}\n')
        explicit = self.write('explicit.yaml', 'dataset: iris\nscenario: {variant: subset, fraction: 0.1}\n'
                                               'seeds: [0, 1, 2]\nunlearn: {alpha: 0.9, max_epochs: 25}\n')
        self.assertEqual(load_config(bare).config_hash, load_config(explicit).config_hash)


class LoadConfigTest(SimpleTestCase):
    def setUp(self):
        """Set up a scratch directory for config files"""
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.dir = Path(self.tmp.name)

    def load_text(self, text):
        path = self.dir / 'experiment.yaml'
        path.write_text(text)
        return load_config(path)

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            load_config(self.dir / 'absent.yaml')

    def test_malformed_yaml(self):
        with self.assertRaises(ConfigError):
            self.load_text('dataset: [iris\n')

    def test_top_level_must_be_a_mapping(self):
        with self.assertRaises(ConfigError):
            self.load_text('- iris\n- mnist\n')

    def test_unknown_method(self):
        with self.assertRaisesMessage(ConfigError, 'Unknown methods'):
            self.load_text('dataset: iris\nscenario: {variant: subset, fraction: 0.1}\nmethods: [GA, Oblivion]\n')

    def test_empty_seed_list(self):
        with self.assertRaises(ConfigError):
            self.load_text('dataset: iris\nscenario: {variant: subset, fraction: 0.1}\nseeds: []\n')

    def test_class_id_out_of_range(self):
        with self.assertRaises(ConfigError):
            self.load_text('dataset: iris\nscenario: {variant: full_class, class_id: 3}\n')

    def test_subset_without_fraction(self):
        with self.assertRaises(ConfigError):
            self.load_text('dataset: iris\nscenario: {variant: subset}\n')

    def test_output_dir_argument_wins(self):
        config = self.load_text('dataset: iris\nscenario: {variant: subset, fraction: 0.1}\noutput_dir: a\n')
        self.assertEqual(config.output_dir, Path('a'))
        config = load_config(self.dir / 'experiment.yaml', output_dir=self.dir / 'b')
        self.assertEqual(config.output_dir, self.dir / 'b')

    def test_bundled_configs_load(self):
        paths = sorted((settings.BASE_DIR / 'configs').glob('*.yaml'))
        self.assertGreaterEqual(len(paths), 6)
        for path in paths:
            config = load_config(path)
            self.assertTrue(config.seeds)
            self.assertTrue(set(config.methods) <= set(METHOD_IDS))

    def test_bundled_configs_cover_every_dataset_and_scenario(self):
        scenarios = {}
        for dataset in ('iris', 'mnist', 'fashion'):
            for variant in ('subset', 'full_class'):
                config = load_config(settings.BASE_DIR / 'configs' / f"{dataset}_{variant}.yaml")
                self.assertEqual((config.dataset, config.scenario.variant), (dataset, variant))
                scenarios[dataset, variant] = config.scenario
        for dataset in ('iris', 'mnist', 'fashion'):
            self.assertEqual(scenarios[dataset, 'subset'].fraction, 0.02)

    def test_overrides_apply_to_their_method_only(self):
        config = load_config(settings.BASE_DIR / 'configs' / 'iris_subset.yaml')
        self.assertEqual(config.unlearn_config('GA', 0).lr, 1e-4)
        self.assertEqual(config.unlearn_config('SCRUB', 0).lr, settings.UNLEARN_DEFAULTS['lr'])
        self.assertEqual(config.unlearn_config('SCRUB', 2).seed, 2)

    def test_method_defaults_sit_below_experiment_overrides(self):
        bare = self.load_text('dataset: iris\nscenario: {variant: subset, fraction: 0.1}\n')
        self.assertEqual(bare.unlearn_config('EU-k', 0).lr, settings.UNLEARN_METHOD_DEFAULTS['EU-k']['lr'])
        self.assertEqual(bare.unlearn_config('CF-k', 0).lr, settings.UNLEARN_DEFAULTS['lr'])
        tuned = self.load_text('dataset: iris\nscenario: {variant: subset, fraction: 0.1}\n'
                               'overrides: {EU-k: {lr: 0.002}}\n')
        self.assertEqual(tuned.unlearn_config('EU-k', 0).lr, 0.002)
        self.assertNotEqual(bare.config_hash, tuned.config_hash)

    def test_spelled_out_method_default_keeps_the_hash(self):
        bare = self.load_text('dataset: iris\nscenario: {variant: subset, fraction: 0.1}\n')
        explicit = self.load_text('dataset: iris\nscenario: {variant: subset, fraction: 0.1}\n'
                                  'overrides: {EU-k: {lr: 0.005}}\n')
        self.assertEqual(bare.config_hash, explicit.config_hash)



class ExperimentConfigSerializerTest(SimpleTestCase):
    def setUp(self):
        """Set up a valid payload"""
        self.payload = {
            'dataset': 'iris',
            'scenario': {'variant': 'full_class', 'class_id': 1},
            'methods': ['GA', 'SCRUB'],
            'seeds': [0, 1],
        }

    def test_valid_payload(self):
        serializer = ExperimentConfigSerializer(data=self.payload)
        self.assertTrue(serializer.is_valid(), serializer.errors)
        config = serializer.save()
        self.assertEqual(config.methods, ('GA', 'SCRUB'))
        self.assertTrue(config.scenario.is_full_class)

    def test_repeated_seeds_rejected(self):
        serializer = ExperimentConfigSerializer(data={**self.payload, 'seeds': [0, 0]})
        self.assertFalse(serializer.is_valid())
        self.assertIn('seeds', serializer.errors)

    def test_repeated_methods_rejected(self):
        serializer = ExperimentConfigSerializer(data={**self.payload, 'methods': ['GA', 'GA']})
        self.assertFalse(serializer.is_valid())
        self.assertIn('methods', serializer.errors)

    def test_override_for_unknown_method_rejected(self):
        serializer = ExperimentConfigSerializer(data={**self.payload, 'overrides': {'Amnesia': {'lr': 0.1}}})
        self.assertFalse(serializer.is_valid())
        self.assertIn('overrides', serializer.errors)

    def test_unlearn_budget_capped(self):
        serializer = ExperimentConfigSerializer(data={**self.payload, 'unlearn': {'max_epochs': 26}})
        self.assertFalse(serializer.is_valid())
        self.assertIn('unlearn', serializer.errors)


class InstalledAppsTest(SimpleTestCase):
    def test_project_apps_and_rest_framework_only(self):
        local = ['diffcore', 'qsim', 'hybrid', 'data', 'train', 'unlearn', 'metrics', 'runner']
        self.assertEqual(settings.INSTALLED_APPS, [*local, 'rest_framework'])
        self.assertEqual({config.name for config in apps.get_app_configs()}, {*local, 'rest_framework'})

    def test_serializers_validate_without_auth(self):
        serializer = ExperimentConfigSerializer(data={'dataset': 'iris',
                                                      'scenario': {'variant': 'subset', 'fraction': 0.02}})
        self.assertTrue(serializer.is_valid(), serializer.errors)


class RunExperimentTest(SimpleTestCase):
    def test_one_cell_per_method_and_seed(self):
        """Eleven methods and one seed give eleven scored cells and one oracle."""
        record = small_record()
        self.assertEqual([cell.method for cell in record.cells], list(METHOD_IDS))
        self.assertTrue(all(cell.ok for cell in record.cells), [cell.error for cell in record.failures])
        self.assertEqual(list(record.oracle_reports), [0])
        self.assertEqual(list(record.base_reports), [0])
        for cell in record.cells:
            self.assertLessEqual(cell.epochs, 2)
            self.assertEqual(len(cell.trace), cell.epochs)

    def test_labels_carry_k(self):
        labels = {cell.method: cell.label for cell in small_record().cells}
        self.assertEqual(labels['CF-k'], 'CF-k1')
        self.assertEqual(labels['EU-k'], 'EU-k1')

    def test_identical_runs_give_identical_reports(self):
        methods = ('GA', 'SCRUB', 'Q-MUL')
        first = ExperimentService(threads=1).run_experiment(small_config(methods), progress=False)
        second = ExperimentService(threads=3).run_experiment(small_config(methods), progress=False)
        self.assertEqual(first.config_hash, second.config_hash)
        pd.testing.assert_frame_equal(report_frame(first).drop(columns='wall_s'),
                                      report_frame(second).drop(columns='wall_s'))

    def test_failing_cell_is_isolated(self):
        """A method that raises is recorded; its neighbours match an undisturbed run."""
        methods = ('GA', 'NegGrad+', 'LCA')

        def flaky(method, *args, **kwargs):
            if method == 'NegGrad+':
                raise RuntimeError('boom')
            return real_run_method(method, *args, **kwargs)

        with patch('runner.service.run_method', side_effect=flaky):
            record = ExperimentService(threads=2).run_experiment(small_config(methods), progress=False)
        clean = ExperimentService(threads=2).run_experiment(small_config(methods), progress=False)
        cells = {cell.method: cell for cell in record.cells}
        self.assertEqual(cells['NegGrad+'].error, 'RuntimeError: boom')
        self.assertIsNone(cells['NegGrad+'].report)
        for cell in clean.cells:
            if cell.method != 'NegGrad+':
                self.assertEqual(cells[cell.method].report.as_dict(), cell.report.as_dict())

    def test_budget_audit(self):
        with patch('runner.service.MAX_BUDGET', 0):
            record = ExperimentService(threads=1).run_experiment(small_config(('GA',)), progress=False)
        self.assertFalse(record.cells[0].ok)
        self.assertTrue(record.cells[0].error.startswith('ContractError'))

    def test_failed_base_run_marks_every_cell(self):
        with patch.object(ExperimentService, 'prepare_base', side_effect=ConfigError('no data')):
            record = ExperimentService(threads=1).run_experiment(small_config(('GA', 'LCA')), progress=False)
        self.assertEqual(len(record.failures), 2)
        self.assertIn('no data', record.cells[0].error)
        self.assertEqual(record.oracle_reports, {})

    def test_full_class_cells_have_no_mia(self):
        record = small_record(('GA', 'SCRUB'), full_class=True)
        for cell in record.cells:
            self.assertTrue(cell.ok, cell.error)
            self.assertIsNone(cell.report.mia)


class EmitReportTest(SimpleTestCase):
    def setUp(self):
        """Set up an output directory"""
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.out = Path(self.tmp.name) / 'reports'

    def test_csv_header_is_exact(self):
        emit_report(small_record(('GA', 'SCRUB')), self.out, ['csv'])
        header = (self.out / 'results.csv').read_text().splitlines()[0]
        self.assertEqual(header, 'method,seed,acc_retain,acc_test,f1_test,acc_forget,uqi,agree_test,mia,'
                                 'kl_retain,js_retain,kl_test,js_test,fidelity_mean,wall_s')
        self.assertEqual(header.split(','), list(CSV_COLUMNS))

    def test_numbers_round_trip_through_csv(self):
        record = small_record(('GA', 'SCRUB'))
        emit_report(record, self.out, ['csv'])
        frame = pd.read_csv(self.out / 'results.csv', dtype={'seed': str}, float_precision='round_trip')
        per_seed = frame[frame['seed'] == '0'].set_index('method')
        for cell in record.cells:
            for column, value in cell.report.as_row().items():
                self.assertEqual(per_seed.loc[cell.label, column], value, f"{cell.label} {column}")

    def test_mean_rows_follow_seed_rows(self):
        record = small_record(('GA', 'SCRUB'))
        frame = report_frame(record)
        self.assertEqual(list(frame['seed']), [0, 0, 'mean', 'mean'])
        mean = frame[(frame['seed'] == 'mean') & (frame['method'] == 'GA')].iloc[0]
        self.assertEqual(mean['acc_test'], record.cells[0].report.acc_test)

    def test_full_class_mia_is_empty(self):
        record = small_record(('GA', 'SCRUB'), full_class=True)
        emit_report(record, self.out)
        frame = pd.read_csv(self.out / 'results.csv')
        self.assertTrue(frame['mia'].isna().all())
        document = json.loads((self.out / 'results.json').read_text())
        self.assertTrue(all(cell['metrics']['mia'] is None for cell in document['cells']))

    def test_json_metadata(self):
        record = small_record(('GA', 'SCRUB'))
        emit_report(record, self.out, ['json'])
        document = json.loads((self.out / 'results.json').read_text())
        self.assertEqual(document['metadata']['config_hash'], record.config_hash)
        self.assertIn('timestamp', document['metadata'])
        self.assertEqual(len(document['cells']), 2)
        self.assertIn('0', document['oracles'])
        self.assertIn('utility_gap', document['cells'][0]['metrics'])
        self.assertFalse((self.out / 'results.csv').exists())

    def test_failed_cells_are_blank(self):
        with patch('runner.service.run_method', side_effect=RuntimeError('boom')):
            failed = ExperimentService(threads=1).run_experiment(small_config(('GA',)), progress=False)
        emit_report(failed, self.out, ['csv'])
        frame = pd.read_csv(self.out / 'results.csv')
        self.assertTrue(frame.drop(columns=['method', 'seed']).isna().all().all())

    def test_unknown_format(self):
        with self.assertRaises(ValueError):
            emit_report(small_record(('GA', 'SCRUB')), self.out, ['xml'])


@lru_cache(maxsize=None)
def bundled_run(name, methods=None, seeds=None):
    """Per-seed base runs and scored cells of a bundled experiment file."""
    config = load_config(settings.BASE_DIR / 'configs' / name)
    if methods is not None:
        config = replace(config, methods=methods)
    if seeds is not None:
        config = config.with_seeds(seeds)
    service = ExperimentService(threads=1)
    bases, cells = {}, {}
    for seed in config.seeds:
        bases[seed] = service.prepare_base(config, seed)
        for method in config.methods:
            cells[method, seed] = service.run_cell(config, bases[seed], method)
    return config, bases, cells


def image_files_present(*datasets):
    return all(Path(path).is_file() for dataset in datasets for path in settings.DATASET_FILES[dataset].values())


class AcceptanceMixin:
    def seed_mean(self, name, method, metric, **run):
        config, _, cells = bundled_run(name, **run)
        values = []
        for seed in config.seeds:
            cell = cells[method, seed]
            self.assertTrue(cell.ok, cell.error)
            values.append(getattr(cell.report, metric))
        return float(np.mean(values))


class IrisAcceptanceTest(AcceptanceMixin, SimpleTestCase):
    """Bundled iris experiments at their full budgets, three seeds each."""

    def retain_drop(self, method):
        config, bases, cells = bundled_run('iris_subset.yaml')
        return float(np.mean([set_accuracy(bases[seed].original, bases[seed].splits.retain)
                              - cells[method, seed].report.acc_retain for seed in config.seeds]))

    def test_subset_utility_bands(self):
        for method in METHOD_IDS:
            with self.subTest(method=method):
                self.assertGreaterEqual(self.seed_mean('iris_subset.yaml', method, 'acc_retain'), 0.85)
                self.assertGreaterEqual(self.seed_mean('iris_subset.yaml', method, 'acc_test'), 0.85)
                self.assertLessEqual(self.seed_mean('iris_subset.yaml', method, 'js_test'), 0.10)

    def test_subset_lca_and_adv_keep_retain_accuracy(self):
        self.assertLessEqual(self.retain_drop('LCA'), 0.1)
        self.assertLessEqual(abs(self.retain_drop('ADV-UNIFORM')), 0.12)

    def test_full_class_oracle_misses_the_forgotten_class(self):
        config, bases, _ = bundled_run('iris_full_class.yaml')
        accuracies = [set_accuracy(bases[seed].oracle, bases[seed].splits.forgotten_test()) for seed in config.seeds]
        self.assertLessEqual(np.mean(accuracies), 0.10)

    def test_full_class_structure(self):
        self.assertGreaterEqual(self.seed_mean('iris_full_class.yaml', 'EU-k', 'agree_test'), 0.55)
        self.assertGreaterEqual(self.seed_mean('iris_full_class.yaml', 'LCA', 'agree_test'), 0.55)
        self.assertGreaterEqual(self.seed_mean('iris_full_class.yaml', 'Certified', 'acc_test'), 0.80)


@pytest.mark.slow
@skipUnless(image_files_present('mnist', 'fashion'), 'MNIST and Fashion-MNIST files are not under QUNL_DATA_DIR')
class ImagePresetTest(AcceptanceMixin, SimpleTestCase):
    """Desk-preset properties of the image experiments, one seed."""
    methods = ('GA', 'EU-k', 'LCA', 'ADV-UNIFORM')

    def test_full_class_forgetting_lowers_forget_accuracy(self):
        for name in ('mnist_full_class.yaml', 'fashion_full_class.yaml'):
            _, bases, cells = bundled_run(name, methods=self.methods, seeds=(0,))
            trained = set_accuracy(bases[0].original, bases[0].splits.forget)
            for method in ('GA', 'LCA', 'ADV-UNIFORM'):
                with self.subTest(config=name, method=method):
                    self.assertTrue(cells[method, 0].ok, cells[method, 0].error)
                    self.assertLessEqual(cells[method, 0].report.acc_forget, trained)

    def test_eu_k_keeps_the_extractor(self):
        _, bases, _ = bundled_run('mnist_full_class.yaml', methods=self.methods, seeds=(0,))
        original = bases[0].original
        result = real_run_method('EU-k', original, bases[0].splits, UnlearnConfig(max_epochs=0))
        kept = set(original.params) - set(group_parameters(original, output_groups(original, 1)))
        self.assertTrue(kept)
        for name in kept:
            self.assertEqual(result.model.params[name].tobytes(), original.params[name].tobytes(), msg=name)

    def test_fashion_eu_k_agrees_with_oracle_more_than_ga(self):
        run = {'methods': self.methods, 'seeds': (0,)}
        self.assertGreater(self.seed_mean('fashion_full_class.yaml', 'EU-k', 'agree_test', **run),
                           self.seed_mean('fashion_full_class.yaml', 'GA', 'agree_test', **run))


class GradcheckTest(SimpleTestCase):
    def test_circuit_gradients_agree(self):
        checks = circuit_checks(circuits=5, seed=0)
        self.assertEqual(len(checks), 25)
        self.assertEqual(sum('angles adjoint/shift' in check.name for check in checks), 5)
        for check in checks:
            self.assertTrue(check.passed, f"{check.name}: {check.error}")

    def test_model_gradients_agree(self):
        for check in model_checks('iris', seed=0):
            self.assertTrue(check.passed, f"{check.name}: {check.error}")


class CliTest(SimpleTestCase):
    def setUp(self):
        """Set up a scratch directory and silence the command output"""
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.dir = Path(self.tmp.name)
        for stream_name in ('sys.stdout', 'sys.stderr'):
            patcher = patch(stream_name, new_callable=io.StringIO)
            patcher.start()
            self.addCleanup(patcher.stop)

    def config_path(self, **kwargs):
        path = self.dir / 'experiment.yaml'
        path.write_text(small_yaml(**kwargs))
        return str(path)

    def test_usage_errors_exit_2(self):
        self.assertEqual(cli_main([]), 2)
        self.assertEqual(cli_main(['forget-everything']), 2)
        self.assertEqual(cli_main(['run']), 2)
        self.assertEqual(cli_main(['run', '--config', self.config_path(), '--bogus']), 2)

    def test_missing_config_exits_2(self):
        self.assertEqual(cli_main(['run', '--config', str(self.dir / 'absent.yaml')]), 2)

    def test_runtime_failure_exits_1(self):
        with patch.object(ExperimentService, 'run_experiment', side_effect=RuntimeError('disk on fire')):
            self.assertEqual(cli_main(['run', '--config', self.config_path()]), 1)

    def test_run_writes_reports(self):
        out = self.dir / 'out'
        code = cli_main(['run', '--config', self.config_path(), '--out', str(out), '--no-progress'])
        self.assertEqual(code, 0)
        self.assertTrue((out / 'results.csv').is_file())
        self.assertTrue((out / 'results.json').is_file())

    def test_stepwise_commands(self):
        """train, oracle, unlearn and evaluate chain through checkpoints."""
        out = self.dir / 'out'
        common = ['--config', self.config_path(), '--out', str(out), '--seed', '0']
        self.assertEqual(cli_main(['train', *common]), 0)
        self.assertEqual(cli_main(['oracle', *common]), 0)
        self.assertEqual(cli_main(['unlearn', *common, '--method', 'GA']), 0)
        self.assertTrue((out / 'GA-seed0.qunl').is_file())
        self.assertEqual(cli_main(['evaluate', *common, '--unlearned', str(out / 'GA-seed0.qunl')]), 0)
        frame = pd.read_csv(out / 'results.csv', dtype={'seed': str})
        self.assertEqual(list(frame['method']), ['GA', 'GA'])
        self.assertTrue(np.isfinite(frame['uqi']).all())

    def test_unlearn_without_checkpoint_exits_2(self):
        out = self.dir / 'empty'
        code = cli_main(['unlearn', '--config', self.config_path(), '--out', str(out), '--method', 'GA'])
        self.assertEqual(code, 2)

    def test_gradcheck_exit_codes(self):
        passing = [GradCheck('ok', 0.0, 1e-7)]
        failing = passing + [GradCheck('bad', 1.0, 1e-7)]
        with patch('runner.management.commands.gradcheck.run_gradcheck', return_value=passing):
            self.assertEqual(cli_main(['gradcheck']), 0)
        with patch('runner.management.commands.gradcheck.run_gradcheck', return_value=failing):
            self.assertEqual(cli_main(['gradcheck']), 1)
