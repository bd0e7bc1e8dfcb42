from enum import Enum


class FlowDirection(str, Enum):
    """Direction of energy flow across a transmission coupling.

    FWD: rotor drives the output. BWD: the output backdrives the rotor.
    """

    FWD = "fwd"
    BWD = "bwd"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown flow direction {value!r}") from None
