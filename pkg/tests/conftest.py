import pytest

from typocf.kb import Feature, Language, TypologicalKB


@pytest.fixture
def tiny_kb() -> TypologicalKB:
    """Six languages, three features, fourteen cells; fully hand-auditable.

    Layout (rows are languages, '-' is unobserved):

                81A  83A  1A
        aaa      1    1    2     genus alpha, Eurasia
        bbb      1    1    -     genus alpha, Eurasia
        ccc      2    2    1     genus alpha, Africa
        ddd      2    2    4     genus beta,  Africa
        eee      3    -    2     genus beta,  Eurasia
        fff      -    2    -     genus beta,  Africa
    """
    languages = (
        Language("aaa", "Aleph", "alpha", "fam1", "Eurasia"),
        Language("bbb", "Bet", "alpha", "fam1", "Eurasia"),
        Language("ccc", "Gimel", "alpha", "fam1", "Africa"),
        Language("ddd", "Dalet", "beta", "fam1", "Africa"),
        Language("eee", "He", "beta", "fam2", "Eurasia"),
        Language("fff", "Vav", "beta", "fam2", "Africa"),
    )
    features = (
        Feature(
            "81A",
            "Order of Subject, Object and Verb",
            "Word Order",
            ((1, "SOV"), (2, "SVO"), (3, "VSO")),
        ),
        Feature("83A", "Order of Object and Verb", "Word Order", ((1, "OV"), (2, "VO"))),
        Feature(
            "1A",
            "Consonant Inventories",
            "Phonology",
            ((1, "Small"), (2, "Average"), (3, "Large"), (4, "Huge")),
        ),
    )
    cells = frozenset(
        {
            ("aaa", "81A", 1),
            ("aaa", "83A", 1),
            ("aaa", "1A", 2),
            ("bbb", "81A", 1),
            ("bbb", "83A", 1),
            ("ccc", "81A", 2),
            ("ccc", "83A", 2),
            ("ccc", "1A", 1),
            ("ddd", "81A", 2),
            ("ddd", "83A", 2),
            ("ddd", "1A", 4),
            ("eee", "81A", 3),
            ("eee", "1A", 2),
            ("fff", "83A", 2),
        }
    )
    return TypologicalKB(languages, features, cells)
