import warnings

import pytest

from masabs.cases import gen_asv


def pytest_configure(config):
    # random systems often have senders without receivers; the warning is expected
    warnings.filterwarnings("ignore", message="channel .* has senders but no receiver")


@pytest.fixture(scope="session")
def asv():
    return gen_asv(3)


SMALL = """
system small {
  shared s : 0..2
  chan c
}

agent P {
  var x : 0..3
  loc a, b
  init a
  edge a -> b sync c! do x := x + 1; s := x
  edge b -> a [x < 3]
}

agent Q {
  var y : 0..2
  loc u, v
  init u
  edge u -> v sync c? do y := s
  edge v -> u do y := 0
}
"""


@pytest.fixture
def small_text():
    return SMALL


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[n])
