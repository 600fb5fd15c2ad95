from fractions import Fraction
from typing import Annotated, Union

from pydantic import PlainSerializer, PlainValidator


def parse_rational(value: Union[Fraction, int, str, float]) -> Fraction:
    """Accept Fraction, int, "p/q" strings and floats (via their decimal repr)."""
    if isinstance(value, bool):
        raise ValueError("booleans are not rationals")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as e:
            raise ValueError(f"not a rational: {value!r} ({str(e)})")
    raise ValueError(f"not a rational: {value!r}")


# Exact rationals serialize as "p/q" strings so JSON round-trips are lossless.
Rational = Annotated[Fraction, PlainValidator(parse_rational), PlainSerializer(str, return_type=str)]
