"""Layer shapes of the reference autoencoder: (input, kernel(s), output)."""

_B100 = ((9, 100, 20), (9, 20, 20), (9, 20, 100))
_B50 = ((9, 50, 20), (9, 20, 20), (9, 20, 50))

ENCODER = [
    ((512, 1), (9, 1, 100), (512, 100)),
    ((512, 100), _B100, (512, 100)),
    ((512, 100), (9, 100, 100), (256, 100)),
    ((256, 100), _B100, (256, 100)),
    ((256, 100), (9, 100, 1), (256, 1)),
]
DECODER = [
    ((256, 1), (9, 1, 100), (256, 100)),
    ((256, 100), _B100, (256, 100)),
    ((256, 100), (9, 100, 100), (512, 50)),
    ((512, 50), _B50, (512, 50)),
    ((512, 50), (9, 50, 1), (512, 1)),
]
STANDARD_PARAMS = 450_000
LOW_RATE_PARAMS = 670_000
