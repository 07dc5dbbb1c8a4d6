"""Future link prediction on temporal graphs.

Scores candidate destinations for a (source, time) query by cross-attending
the candidates against the source's most recent neighbor history, with
elapsed-time and repeat-count side features feeding the prediction head.
"""

__version__ = "0.1.0"
