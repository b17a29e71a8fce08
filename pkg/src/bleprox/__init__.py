"""BLE proximity classification toolkit.

Synthetic ranging-protocol corpora, a two-stage classifier (gradient-boosted
angle model feeding a dense distance net), and a miss/false-alarm decision
cost scorer, all reproducible from a single seeded configuration.
"""

__version__ = "0.1.0"
