import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

import pytest

from caspr.oracle import SolverConfig


EX1_TEXT = """%@exists
a :- not na.  na :- not a.
b :- not nb.  nb :- not b.
%@forall
c :- not nc.
nc :- not c.
:~ a, not c. [1@1]
:~ b, not nc. [1@1]
%@constraint
:- nb, nc.
"""

APPC_TEXT = """%@exists
a :- not na.  na :- not a.
b :- not nb.  nb :- not b.
%@forall
c :- not nc.
nc :- not c.
:~ a, not c. [1@1]
:~ b, not nc. [1@1]
%@constraint
:- b, c.
:- nb, nc.
:- b, a, nc.
"""


@pytest.fixture(scope="session")
def cfg():
    return SolverConfig()


@pytest.fixture(scope="session")
def ex1():
    from caspr.parser import parse_quantified

    return parse_quantified(EX1_TEXT)


@pytest.fixture(scope="session")
def appc():
    from caspr.parser import parse_quantified

    return parse_quantified(APPC_TEXT)
