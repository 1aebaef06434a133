"""
CLI interface to ql-order.

Subcommands run one experiment on a TOML config (the five-tone preset if no config is given) and write CSV.
Exit codes: 0 success, 1 usage or configuration error, 2 numerical degeneracy.
"""
import logging
import sys
from typing import List, Optional

import click

from ql_order.config.io import config_to_toml, dump_config, load_config
from ql_order.config.model import SWEEP_VARIABLES, ExperimentConfig
from ql_order.errors import ConfigError, DegenerateComponentError, InvalidArgumentError
from ql_order.experiments import (
    doppler_speed_limit,
    estimate_order,
    preset_five_tones,
    read_samples,
    sweep_error_probability,
    sweep_normalized,
    theory_table,
    worst_case_report,
    write_csv,
)
from ql_order.utils import format_float, parse_float_list


log = logging.getLogger("ql_order.cli")

LOG_FORMAT = "[%(levelname)5s] %(name)s - %(message)s"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DEGENERATE = 2


class ExitCodeGroup(click.Group):
    """Click group mapping usage, config and numerical errors to the documented exit codes."""

    def main(self, *args, standalone_mode: bool = True, **kwargs):  # pylint: disable=arguments-differ
        try:
            result = super().main(*args, standalone_mode=False, **kwargs)
        except click.ClickException as exc:
            exc.show()
            code = EXIT_USAGE
        except click.Abort:
            click.echo("Aborted!", err=True)
            code = EXIT_USAGE
        except DegenerateComponentError as exc:
            log.error(exc)
            click.echo(f"Error: {exc}", err=True)
            code = EXIT_DEGENERATE
        except (ConfigError, InvalidArgumentError) as exc:
            log.error(exc)
            click.echo(f"Error: {exc}", err=True)
            code = EXIT_USAGE
        else:
            code = result if isinstance(result, int) else EXIT_OK
        if standalone_mode:
            sys.exit(code)
        return code


def _float_list(ctx, param, value: Optional[str]) -> Optional[List[float]]:  # pylint: disable=unused-argument
    if value is None:
        return None
    try:
        return parse_float_list(value)
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from exc


config_option = click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, file_okay=True, dir_okay=False, readable=True),
    help="TOML experiment config; the five-tone preset if omitted.",
)
out_option = click.option("--out", "out_path", type=click.Path(dir_okay=False), help="Output file; stdout if omitted.")
seed_option = click.option("--seed", type=int, help="Base seed of the noise streams.")
trials_option = click.option("--trials", type=click.IntRange(min=1), help="Monte Carlo trials per SNR.")
snr_option = click.option("--snr-db", "snr_db", callback=_float_list, help="Comma separated SNR values in dB.")


def load_experiment(
    config_path: Optional[str], seed: Optional[int] = None, trials: Optional[int] = None
) -> ExperimentConfig:
    """Read the config (or the preset) and apply command line overrides."""
    config = load_config(config_path) if config_path else preset_five_tones()
    updates = {}
    if seed is not None:
        updates["seed"] = seed
    if trials is not None:
        updates["n_trials"] = trials
    if updates:
        config = config.copy(update={"run": config.run.copy(update=updates)})
    log.info(f"Scenario {config.scenario.name!r}: nu_true={config.run.nu_true}, nu_max={config.run.nu_max}")
    return config


def _output(config: ExperimentConfig, out_path: Optional[str]) -> Optional[str]:
    return out_path if out_path is not None else config.run.output


@click.group(cls=ExitCodeGroup)
@click.option("-v", "--verbose", is_flag=True, help="Log debug messages.")
def run(verbose):
    """Estimate the number of sinusoids from measured parameters and predict its error probability."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, format=LOG_FORMAT)


@run.command()
@click.argument("samples_path", type=click.Path(exists=True, file_okay=True, dir_okay=False, readable=True))
@config_option
def estimate(samples_path, config_path):
    """Print the estimated number of components of a sample file (one real per line)."""
    config = load_experiment(config_path)
    nu_hat, _ = estimate_order(config, read_samples(samples_path))
    click.echo(nu_hat)


@run.command()
@config_option
@out_option
@snr_option
def theory(config_path, out_path, snr_db):
    """Write R, Q, rho and the abridged error probability per SNR."""
    config = load_experiment(config_path)
    header, rows = theory_table(config, snr_db)
    write_csv(_output(config, out_path), header, rows)


@run.command()
@config_option
@out_option
@seed_option
@trials_option
@snr_option
def simulate(config_path, out_path, seed, trials, snr_db):
    """Write the Monte Carlo error probability next to the abridged error probability per SNR."""
    config = load_experiment(config_path, seed, trials)
    header, rows = sweep_error_probability(config, snr_db)
    write_csv(_output(config, out_path), header, rows)


@run.command()
@config_option
@out_option
@click.option("--var", "sweep_var", type=click.Choice(SWEEP_VARIABLES), help="Swept error variable.")
@click.option("--grid", callback=_float_list, help="Comma separated values of the swept variable.")
def sweep(config_path, out_path, sweep_var, grid):
    """Write the normalised abridged error probability over one error variable."""
    config = load_experiment(config_path)
    header, rows = sweep_normalized(config, sweep_var, grid)
    write_csv(_output(config, out_path), header, rows)


@run.command()
@config_option
@out_option
def worstcase(config_path, out_path):
    """Write the largest abridged error probability over the [box] error intervals."""
    config = load_experiment(config_path)
    header, rows = worst_case_report(config)
    write_csv(_output(config, out_path), header, rows)


@run.command()
@out_option
def preset(out_path):
    """Dump the five-tone preset config as TOML."""
    config = preset_five_tones()
    if out_path is None:
        click.echo(config_to_toml(config), nl=False)
        return
    dump_config(config, out_path)


@run.command()
@click.option("--delta-omega", "delta_omega", type=float, required=True, help="Largest frequency error, rad/sample.")
@click.option("--carrier", type=float, required=True, help="Carrier frequency, rad/sample.")
@click.option("--wave-speed", "wave_speed", type=float, default=3.0e8, show_default=True, help="Wave speed, m/s.")
def doppler(delta_omega, carrier, wave_speed):
    """Print the source speed limit keeping the Doppler shift within the frequency error."""
    click.echo(format_float(doppler_speed_limit(delta_omega, carrier, wave_speed)))


if __name__ == "__main__":
    run()  # pylint: disable=no-value-for-parameter
