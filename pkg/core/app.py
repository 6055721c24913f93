import click


@click.group()
def app():
    """
    Measurement-based cooling of spin-1/2 chains.

    Polarise a chain in a strong field with projective measurements and RF
    feedback, then ramp the field down adiabatically towards the ground state.
    """
