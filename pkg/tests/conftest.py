import os

from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from iacsit.channel_model import AntennaConfig

settings.register_profile(
    "default", deadline=None, max_examples=100, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("ci", parent=settings.get_profile("default"), derandomize=True)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))

# worked examples: a five-user tight and a three-user super-feasible config
TIGHT5 = "[(2,3).(2,4).(3,5).(3,2).(4,2)]"
SUPER3 = "[(2,2).(3,2).(2,3)]"


@st.composite
def configs(draw, k_min=1, k_max=5, c_max=5):
    K = draw(st.integers(k_min, k_max))
    counts = st.integers(1, c_max)
    N = tuple(draw(st.lists(counts, min_size=K, max_size=K)))
    M = tuple(draw(st.lists(counts, min_size=K, max_size=K)))
    return AntennaConfig(N, M)


@st.composite
def subics(draw, K):
    users = st.sets(st.integers(1, K))
    return draw(users), draw(users)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
