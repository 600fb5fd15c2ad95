import enum


class CertificateMode(str, enum.Enum):
    EXHAUSTIVE = "exhaustive"
    SAMPLED = "sampled"
    SYMBOLIC = "symbolic"


class DistanceMethod(str, enum.Enum):
    EXACT = "exact"
    SAMPLED = "sampled"


class ExpansionCriterion(str, enum.Enum):
    LOSSLESS = "lossless"
    UNIQUE = "unique"


class GroupKind(str, enum.Enum):
    ZMR = "zmr"
    ABELIAN = "abelian"
    PERM = "perm"
    PRODUCT = "product"

