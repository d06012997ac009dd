"""Online duet accompaniment engine.

Learns an accompaniment policy against human melody parts with an ensemble of
learned reward models and actor-critic training, evaluates generations with
objective style metrics, and serves live browser duet sessions.
"""

__version__ = "0.1.0"
