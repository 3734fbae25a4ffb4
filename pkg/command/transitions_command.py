from spinCore.hamiltonian import solve
from spinTransitions.transition import transition_table
from .base_command import CommandRunner


class TransitionsCommand(CommandRunner):
    name = "transitions"

    def compute(self, progress_callback=None):
        sol = solve(self.system, self.ops, float(self.config.field))
        return transition_table(sol, self.system, self.ops, curvature=True)
