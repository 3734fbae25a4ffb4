import numpy as np

from decoherence.echo_decay import fit_echo_decay, simulate_echo_decay
from pipeline.echo_pipeline import build_decay_table, echo_arrays
from pipeline.table_writer import read_table
from .base_command import CommandRunner


class EchoCommand(CommandRunner):
    name = "echo"

    def compute(self, progress_callback=None):
        config = self.config
        if config.simulate:
            max_delay = config.max_delay or 3.0 * config.T2
            delays = np.linspace(0.0, max_delay, config.grid)
            decay = simulate_echo_decay(config.T2, config.n, delays, noise=config.noise,
                                        magnitude=config.magnitude, seed=config.seed)
            return build_decay_table(decay)

        delays, amplitude = echo_arrays(read_table(config.data))
        return fit_echo_decay(delays, amplitude, magnitude=config.magnitude).to_dict()
