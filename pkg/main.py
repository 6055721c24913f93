"""
Here the command-line application is assembled.

Attributes:
    app (click.Group): The root command group; every feature app registers
        its commands on it.
"""

from apps.runs.routes import (
    adiabatic_command,
    full_command,
    ground_state_command,
    plot_command,
    polarize_command,
    sweep_command,
)
from core.app import app

app.add_command(ground_state_command)
app.add_command(polarize_command)
app.add_command(adiabatic_command)
app.add_command(full_command)
app.add_command(plot_command)
app.add_command(sweep_command)
