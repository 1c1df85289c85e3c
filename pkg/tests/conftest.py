import pytest

from parteval import parse_sparql
from parteval.matcher import ground

import helpers


@pytest.fixture(scope="session")
def movie():
    """(graph, distributed graph) for the shared movie fixture."""
    return helpers.movie_db()


@pytest.fixture(scope="session")
def movie_graph(movie):
    return movie[0]


@pytest.fixture(scope="session")
def movie_dg(movie):
    return movie[1]


@pytest.fixture(scope="session")
def movie_query():
    return parse_sparql(helpers.MOVIE_QUERY)


@pytest.fixture(scope="session")
def movie_bgp(movie_query):
    return movie_query.node.graph


@pytest.fixture(scope="session")
def movie_gq(movie_bgp, movie_graph):
    """The movie pattern grounded against the movie graph."""
    return ground(movie_bgp, movie_graph)
