from medtest.utils.strenum import StrEnum


class OutcomeFamily(StrEnum):
    LINEAR = "linear"
    LOGISTIC = "logistic"
    COX = "cox"


class TestMethod(StrEnum):
    """
    The four tests of H0: alpha * beta = 0, in the column order of the tables.
    """

    __test__ = False

    SOBEL = "Sobel"
    JS = "JS"
    ASOBEL = "ASobel"
    AJS = "AJS"


class StudyKind(StrEnum):
    SIZE_POWER = "size_power"
    FWER = "fwer"
    COVERAGE = "coverage"


class NaPolicy(StrEnum):
    DROP_ROWS = "drop_rows"
    ERROR = "error"


class IntervalMethod(StrEnum):
    SOBEL = "Sobel"
    ASOBEL = "ASobel"


class Metric(StrEnum):
    SIZE = "size"
    POWER = "power"
    FWER = "fwer"
    CP = "cp"
    LCI = "lci"
