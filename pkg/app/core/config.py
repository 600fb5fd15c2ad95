from pydantic_settings import BaseSettings
from typing import List


class Settings(BaseSettings):
    # Project
    PROJECT_NAME: str = "groupcodes"
    VERSION: str = "1.0.0"

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    # Enumeration caps
    HADAMARD_MAX_K: int = 20
    CERTIFY_EXHAUSTIVE_MAX_K: int = 24
    CERTIFY_SAMPLED_TRIALS: int = 4096
    SYMBOLIC_MATCHING_MAX_K: int = 12
    MATCHING_SAMPLED_PAIRS: int = 2048
    GROUP_ORDER_CAP: int = 2000
    SUBGROUP_COUNT_CAP: int = 20000
    DISTANCE_BUDGET: int = 2 ** 24
    DISTANCE_SAMPLED_TRIALS: int = 65536
    VECTOR_SPACE_BUDGET: int = 2 ** 22
    VERIFY_SUBSET_BUDGET: int = 2_000_000
    VERIFY_SAMPLED_TRIALS: int = 200_000
    COMPOSE_SIZE_BUDGET: int = 2_000_000

    # Construction constants (desk runs override them per call)
    SYNDROME_REPS: int = 432
    SYNDROME_TARGET_FACTOR: int = 12
    AMPLIFY_GROUPS: int = 61
    SPIELMAN_DEGREE: int = 16
    PMSG_EXPONENT: str = "17/4"
    PMSG_ENVELOPE: int = 85

    # Resampling
    MAX_RESAMPLES: int = 20
    GRAPH_MAX_RESAMPLES: int = 2000

    # Abelian codes
    DEFAULT_PRIMES: List[int] = [2, 3, 5, 7, 11]

    # Parallelism (1 keeps baseline runs bit-exact)
    THREADS: int = 1

    class Config:
        env_file = ".env"
        case_sensitive = True


settings = Settings()
