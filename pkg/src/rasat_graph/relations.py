"""Closed vocabulary of directed relation labels.

Every ordered pair of items in a serialized input carries exactly one of
these labels.  The integer ids are stable: they index the rows of the
relation embedding tables and the cells of RASM matrices, so the order
below must never change.
"""

from enum import IntEnum


class RelationType(IntEnum):
    QUESTION_QUESTION_DIST_MINUS_2 = 0
    QUESTION_QUESTION_DIST_MINUS_1 = 1
    QUESTION_QUESTION_DIST_PLUS_1 = 2
    QUESTION_QUESTION_DIST_PLUS_2 = 3
    QUESTION_QUESTION_IDENTITY = 4
    QUESTION_QUESTION_GENERIC = 5
    FORWARD_SYNTAX = 6
    BACKWARD_SYNTAX = 7
    NONE_SYNTAX = 8
    CO_RELATIONS = 9
    COREF_RELATIONS = 10
    QUESTION_ANY_GENERIC = 11
    QUESTION_TABLE_EXACTMATCH = 12
    QUESTION_TABLE_PARTIALMATCH = 13
    QUESTION_TABLE_NOMATCH = 14
    QUESTION_COLUMN_EXACTMATCH = 15
    QUESTION_COLUMN_PARTIALMATCH = 16
    QUESTION_COLUMN_NOMATCH = 17
    QUESTION_COLUMN_VALUEMATCH = 18
    ANY_QUESTION_GENERIC = 19
    ANY_ANY_IDENTITY = 20
    ANY_TABLE_GENERIC = 21
    ANY_COLUMN_GENERIC = 22
    TABLE_QUESTION_EXACTMATCH = 23
    TABLE_QUESTION_PARTIALMATCH = 24
    TABLE_QUESTION_NOMATCH = 25
    TABLE_ANY_GENERIC = 26
    TABLE_TABLE_GENERIC = 27
    TABLE_TABLE_IDENTITY = 28
    TABLE_TABLE_FK = 29
    TABLE_TABLE_FKR = 30
    TABLE_TABLE_FKB = 31
    TABLE_COLUMN_PK = 32
    TABLE_COLUMN_HAS = 33
    TABLE_COLUMN_GENERIC = 34
    COLUMN_QUESTION_EXACTMATCH = 35
    COLUMN_QUESTION_PARTIALMATCH = 36
    COLUMN_QUESTION_NOMATCH = 37
    COLUMN_QUESTION_VALUEMATCH = 38
    COLUMN_ANY_GENERIC = 39
    COLUMN_TABLE_PK = 40
    COLUMN_TABLE_HAS = 41
    COLUMN_TABLE_GENERIC = 42
    COLUMN_COLUMN_IDENTITY = 43
    COLUMN_COLUMN_SAMETABLE = 44
    COLUMN_COLUMN_FK = 45
    COLUMN_COLUMN_FKR = 46
    COLUMN_COLUMN_GENERIC = 47
    HAS_DBCONTENT = 48
    HAS_DBCONTENT_R = 49
    NO_RELATION = 50

    @property
    def label(self) -> str:
        return RELATION_LABELS[self.value]

    @classmethod
    def from_label(cls, label: str) -> "RelationType":
        return cls(_LABEL_TO_ID[label])


RELATION_LABELS: tuple[str, ...] = (
    "Question-Question-Dist(-2)",
    "Question-Question-Dist(-1)",
    "Question-Question-Dist(+1)",
    "Question-Question-Dist(+2)",
    "Question-Question-Identity",
    "Question-Question-Generic",
    "Forward-Syntax",
    "Backward-Syntax",
    "None-Syntax",
    "Co-Relations",
    "Coref-Relations",
    "Question-*-Generic",
    "Question-Table-Exactmatch",
    "Question-Table-Partialmatch",
    "Question-Table-Nomatch",
    "Question-Column-Exactmatch",
    "Question-Column-Partialmatch",
    "Question-Column-Nomatch",
    "Question-Column-Valuematch",
    "*-Question-Generic",
    "*-*-Identity",
    "*-Table-Generic",
    "*-Column-Generic",
    "Table-Question-Exactmatch",
    "Table-Question-Partialmatch",
    "Table-Question-Nomatch",
    "Table-*-Generic",
    "Table-Table-Generic",
    "Table-Table-Identity",
    "Table-Table-Fk",
    "Table-Table-Fkr",
    "Table-Table-Fkb",
    "Table-Column-Pk",
    "Table-Column-Has",
    "Table-Column-Generic",
    "Column-Question-Exactmatch",
    "Column-Question-Partialmatch",
    "Column-Question-Nomatch",
    "Column-Question-Valuematch",
    "Column-*-Generic",
    "Column-Table-Pk",
    "Column-Table-Has",
    "Column-Table-Generic",
    "Column-Column-Identity",
    "Column-Column-Sametable",
    "Column-Column-Fk",
    "Column-Column-Fkr",
    "Column-Column-Generic",
    "Has-Dbcontent",
    "Has-Dbcontent-R",
    "No-Relation",
)

_LABEL_TO_ID = {label: i for i, label in enumerate(RELATION_LABELS)}

#: Number of relation kinds; rows of each embedding table.
RELATION_COUNT = len(RELATION_LABELS)

#: Labels that act as placeholders for "no specific relation".  Cells holding
#: one of these are omitted from the sparse graph JSON export; a reader
#: reconstructs them from the item kinds alone (see the format notes in the
#: README).
MOCK_RELATIONS = frozenset(
    {
        RelationType.QUESTION_QUESTION_GENERIC,
        RelationType.NONE_SYNTAX,
        RelationType.QUESTION_ANY_GENERIC,
        RelationType.QUESTION_TABLE_NOMATCH,
        RelationType.QUESTION_COLUMN_NOMATCH,
        RelationType.ANY_QUESTION_GENERIC,
        RelationType.ANY_TABLE_GENERIC,
        RelationType.ANY_COLUMN_GENERIC,
        RelationType.TABLE_QUESTION_NOMATCH,
        RelationType.TABLE_ANY_GENERIC,
        RelationType.TABLE_TABLE_GENERIC,
        RelationType.TABLE_COLUMN_GENERIC,
        RelationType.COLUMN_QUESTION_NOMATCH,
        RelationType.COLUMN_ANY_GENERIC,
        RelationType.COLUMN_TABLE_GENERIC,
        RelationType.COLUMN_COLUMN_GENERIC,
        RelationType.NO_RELATION,
    }
)
