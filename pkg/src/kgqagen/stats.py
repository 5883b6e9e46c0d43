"""Cross-run consistency analytics.

Two dataset variants built from the same subgraph set are compared three
ways: question-level matching (identical / paraphrased / unique), a
Pearson chi-square test on the run-by-topic contingency table, and
Cramer's V as the effect size. The chi-square tail probability is computed
from first principles (regularized upper incomplete gamma via series and
continued fraction) so results do not depend on an external stats stack.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import asdict, dataclass
from typing import Protocol, Sequence

from .qa_gen import QaCandidate


class AlignmentError(ValueError):
    """The two runs share no documents and cannot be compared."""


class DegenerateTableError(ValueError):
    """Contingency table has a zero marginal or too few rows/columns."""


@dataclass(frozen=True)
class RunComparison:
    run_a: str
    run_b: str
    identical: int
    paraphrased: int
    unique: int
    chi2: float
    dof: int
    p_value: float
    cramers_v: float

    def to_json_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TopicDistribution:
    labels: tuple[str, ...]
    counts: tuple[int, ...]

    @property
    def total(self) -> int:
        return sum(self.counts)


DEFAULT_TOPICS = ("sports", "science", "finance", "technology", "politics", "entertainment")


# -- question normalization and matching --------------------------------------


def normalize_question(q: str) -> str:
    """Casefold, collapse whitespace, strip trailing sentence punctuation."""
    q = " ".join(q.split()).casefold()
    return q.rstrip(" .?!")


def _tokens(text: str) -> frozenset[str]:
    return frozenset(re.findall(r"\w+", text.casefold()))


def token_jaccard(a: str, b: str) -> float:
    ta, tb = _tokens(a), _tokens(b)
    if not ta and not tb:
        return 1.0
    return len(ta & tb) / len(ta | tb)


def _normalized_path(path: Sequence[tuple[str, str, str]]) -> frozenset[tuple[str, str, str]]:
    return frozenset(
        (normalize_question(s), normalize_question(p), normalize_question(o))
        for s, p, o in path
    )


def classify_pairs(
    a: Sequence[QaCandidate],
    b: Sequence[QaCandidate],
    *,
    jaccard_threshold: float = 0.6,
) -> tuple[int, int, int]:
    """Match the two runs' questions per document and count the outcome.

    Per shared document, exact normalized-question matches pair off as
    identical; remaining cross pairs with token Jaccard >= the threshold OR
    the same normalized answer and supporting path pair off greedily
    (highest Jaccard first) as paraphrased; everything left on either side
    is unique. A matched pair counts once, an unmatched item counts once,
    so 2 * (identical + paraphrased) + unique equals the total item count.
    """
    docs_a = _group_by_doc(a)
    docs_b = _group_by_doc(b)
    if a and b and not (set(docs_a) & set(docs_b)):
        raise AlignmentError("runs share no doc ids; were they generated from the same corpus?")
    identical = paraphrased = unique = 0
    for doc_id in sorted(set(docs_a) | set(docs_b)):
        items_a = docs_a.get(doc_id, [])
        items_b = docs_b.get(doc_id, [])
        free_a = list(range(len(items_a)))
        free_b = list(range(len(items_b)))

        # pass 1: exact matches after normalization
        norms_b: dict[str, list[int]] = {}
        for j in free_b:
            norms_b.setdefault(normalize_question(items_b[j].question), []).append(j)
        still_a = []
        for i in free_a:
            bucket = norms_b.get(normalize_question(items_a[i].question))
            if bucket:
                bucket.pop(0)
                identical += 1
            else:
                still_a.append(i)
        free_a = still_a
        free_b = [j for bucket in norms_b.values() for j in bucket]
        free_b.sort()

        # pass 2: greedy paraphrase matching, best Jaccard first
        scored = []
        for i in free_a:
            for j in free_b:
                ca, cb = items_a[i], items_b[j]
                jac = token_jaccard(ca.question, cb.question)
                same_answer = normalize_question(ca.answer) == normalize_question(cb.answer)
                same_path = _normalized_path(ca.supporting_path) == _normalized_path(
                    cb.supporting_path
                )
                if jac >= jaccard_threshold or (same_answer and same_path):
                    scored.append((-jac, i, j))
        scored.sort()
        used_a: set[int] = set()
        used_b: set[int] = set()
        for _, i, j in scored:
            if i not in used_a and j not in used_b:
                used_a.add(i)
                used_b.add(j)
                paraphrased += 1
        unique += (len(free_a) - len(used_a)) + (len(free_b) - len(used_b))
    return identical, paraphrased, unique


def _group_by_doc(items: Sequence[QaCandidate]) -> dict[str, list[QaCandidate]]:
    grouped: dict[str, list[QaCandidate]] = {}
    for item in items:
        grouped.setdefault(item.doc_id, []).append(item)
    return grouped


# -- chi-square from first principles ------------------------------------------


def _gamma_p_series(a: float, x: float, eps: float = 1e-16, itmax: int = 500) -> float:
    ap = a
    term = total = 1.0 / a
    for _ in range(itmax):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * eps:
            return total * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise ArithmeticError("incomplete gamma series failed to converge")


def _gamma_q_contfrac(a: float, x: float, eps: float = 1e-16, itmax: int = 500) -> float:
    # modified Lentz evaluation of the continued fraction for Q(a, x)
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, itmax + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise ArithmeticError("incomplete gamma continued fraction failed to converge")


def regularized_gamma_q(a: float, x: float) -> float:
    """Upper regularized incomplete gamma Q(a, x) for a > 0, x >= 0."""
    if a <= 0:
        raise ValueError("shape parameter must be positive")
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0.0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_p_series(a, x)
    return _gamma_q_contfrac(a, x)


def chi_square(table: Sequence[Sequence[float]]) -> tuple[float, int, float]:
    """Pearson chi-square statistic, degrees of freedom, and upper-tail p.

    Requires at least a 2x2 table with every row and column total positive.
    """
    rows = len(table)
    if rows < 2:
        raise DegenerateTableError("need at least two rows")
    cols = len(table[0])
    if cols < 2:
        raise DegenerateTableError("need at least two columns")
    for row in table:
        if len(row) != cols:
            raise DegenerateTableError("table rows have unequal lengths")
        for value in row:
            if value < 0:
                raise DegenerateTableError("counts must be nonnegative")
    row_totals = [sum(row) for row in table]
    col_totals = [sum(row[j] for row in table) for j in range(cols)]
    n = sum(row_totals)
    if any(rt == 0 for rt in row_totals) or any(ct == 0 for ct in col_totals):
        raise DegenerateTableError("zero marginal total")
    chi2 = 0.0
    for i in range(rows):
        for j in range(cols):
            expected = row_totals[i] * col_totals[j] / n
            diff = table[i][j] - expected
            chi2 += diff * diff / expected
    dof = (rows - 1) * (cols - 1)
    p_value = regularized_gamma_q(dof / 2.0, chi2 / 2.0)
    return chi2, dof, p_value


def cramers_v(chi2: float, n: int, r: int, c: int) -> float:
    """Effect size sqrt(chi2 / (n * min(r - 1, c - 1)))."""
    if n <= 0:
        raise ValueError("n must be positive")
    if min(r, c) < 2:
        raise ValueError("need at least a 2x2 table")
    if chi2 < 0:
        raise ValueError("chi2 must be nonnegative")
    return math.sqrt(chi2 / (n * min(r - 1, c - 1)))


# -- topic labeling -------------------------------------------------------------


class TopicLabeler(Protocol):
    def label(self, question: str) -> str: ...


_KEYWORDS: dict[str, tuple[str, ...]] = {
    "sports": ("team", "game", "player", "league", "season", "coach", "olympic",
               "tournament", "match", "stadium"),
    "science": ("species", "theory", "element", "physics", "chemical", "biology",
                "experiment", "planet", "astronomer", "scientist"),
    "finance": ("bank", "currency", "stock", "market", "investment", "economy",
                "fund", "revenue", "trade", "company"),
    "technology": ("software", "computer", "internet", "device", "engineer",
                   "algorithm", "network", "robot", "invention", "machine"),
    "politics": ("president", "election", "government", "minister", "parliament",
                 "senator", "policy", "treaty", "party", "mayor"),
    "entertainment": ("film", "movie", "album", "song", "actor", "actress",
                      "director", "band", "series", "novel"),
}


class KeywordTopicLabeler:
    """Keyword-rule labeler over the six default topics.

    Counts keyword hits per topic and takes the best-scoring one. Questions
    hitting no keyword are spread across topics by a stable content hash,
    which keeps contingency tables non-degenerate on synthetic corpora
    whose questions carry no domain terms.
    """

    def __init__(self, topics: tuple[str, ...] = DEFAULT_TOPICS):
        self._topics = topics
        self._keywords = {t: frozenset(_KEYWORDS.get(t, ())) for t in topics}

    def label(self, question: str) -> str:
        tokens = _tokens(question)
        best_topic = ""
        best_hits = 0
        for topic in self._topics:
            hits = len(tokens & self._keywords[topic])
            if hits > best_hits:
                best_topic, best_hits = topic, hits
        if best_hits:
            return best_topic
        digest = hashlib.sha256(normalize_question(question).encode("utf-8")).digest()
        return self._topics[digest[0] % len(self._topics)]


def topic_distribution(
    questions: Sequence[str],
    labeler: TopicLabeler,
    topics: tuple[str, ...] = DEFAULT_TOPICS,
) -> TopicDistribution:
    counts = dict.fromkeys(topics, 0)
    for question in questions:
        label = labeler.label(question)
        if label not in counts:
            raise ValueError(f"labeler produced unknown topic {label!r}")
        counts[label] += 1
    return TopicDistribution(topics, tuple(counts[t] for t in topics))


# -- run comparison -------------------------------------------------------------


def compare_runs(
    a: Sequence[QaCandidate],
    b: Sequence[QaCandidate],
    labeler: TopicLabeler | None = None,
    *,
    run_a: str = "run_a",
    run_b: str = "run_b",
    topics: tuple[str, ...] = DEFAULT_TOPICS,
    jaccard_threshold: float = 0.6,
) -> RunComparison:
    """Full pairwise comparison of two dataset variants.

    Topics with zero questions in both runs are dropped before the
    chi-square test so its positive-marginal precondition holds; the
    reduced column count feeds Cramer's V.
    """
    labeler = labeler or KeywordTopicLabeler(topics)
    identical, paraphrased, unique = classify_pairs(
        a, b, jaccard_threshold=jaccard_threshold
    )
    dist_a = topic_distribution([c.question for c in a], labeler, topics)
    dist_b = topic_distribution([c.question for c in b], labeler, topics)
    keep = [j for j in range(len(topics)) if dist_a.counts[j] or dist_b.counts[j]]
    if len(keep) < 2:
        raise DegenerateTableError("fewer than two topics observed across both runs")
    table = [
        [dist_a.counts[j] for j in keep],
        [dist_b.counts[j] for j in keep],
    ]
    chi2, dof, p_value = chi_square(table)
    n = dist_a.total + dist_b.total
    v = cramers_v(chi2, n, 2, len(keep))
    return RunComparison(run_a, run_b, identical, paraphrased, unique, chi2, dof, p_value, v)


def format_comparison_table(rows: Sequence[RunComparison]) -> str:
    """Plain-text report table, one line per run pair."""
    header = ("Comparison", "Identical", "Paraphrased", "Unique", "Chi2", "p-value", "Cramers V")
    body = [
        (
            f"{row.run_a} vs {row.run_b}",
            str(row.identical),
            str(row.paraphrased),
            str(row.unique),
            f"{row.chi2:.2f}",
            f"{row.p_value:.4f}",
            f"{row.cramers_v:.4f}",
        )
        for row in rows
    ]
    widths = [max(len(header[i]), *(len(r[i]) for r in body)) if body else len(header[i])
              for i in range(len(header))]
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(header)).rstrip(),
        "  ".join("-" * w for w in widths),
    ]
    for r in body:
        lines.append("  ".join(r[i].ljust(widths[i]) for i in range(len(r))).rstrip())
    return "\n".join(lines) + "\n"
