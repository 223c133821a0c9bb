"""The three fixed models whose MPS export is pinned byte for byte."""

from eanm.variants import SLEEP, Variant
from instances import diamond, two_node, two_period

CASES = {
    "two_node_sleep": (two_node, Variant(energy=SLEEP)),
    "diamond_ecmp": (lambda: diamond(omega_max=4), Variant(energy=SLEEP, shortest_path=True)),
    "two_period_delta": (lambda: two_period(delta=0.5), Variant(energy=SLEEP, multiperiod=True)),
}
