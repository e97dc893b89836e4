"""Seeded synthetic corpora with known labels and simulated annotators.

Documents are filler sentences drawn from a non-clinical word list, with
template sentences planted at least one window apart. Each template
carries exactly one lexicon term, so every planted mention becomes one
candidate span. Templates cover the ambiguity classes seen in real notes:
patient pain, negation, hypothetical and third-party mentions,
metaphor, misspelling and conjoined tokens.

The label is a property of the template category, and the categories are
separated by cue words (``denies``/``without`` for negation,
``feared``/``worried`` for hypotheticals, relatives for third parties), so
a lexical model can learn them.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from painclf.annotation import AnnotationRecord, Label, adjudicate_all, write_annotations, write_gold
from painclf.corpus_io import Document, write_corpus
from painclf.errors import PainClfError
from painclf.jsonl import write_records
from painclf.lexicon import Lexicon, default_lexicon
from painclf.spans import DEFAULT_WINDOW, CandidateSpan, extract_spans, write_spans

ANNOTATORS = ("A1", "A2", "A3")
LABEL_ORDER = (Label.RELEVANT, Label.NOT_RELEVANT, Label.NEGATED)

# Slots: {term} is the lexicon hit, {site} a body site, {sev} a severity,
# {time} a duration, {n} a score out of ten.
TEMPLATES: dict[Label, list[tuple[float, str]]] = {
    Label.RELEVANT: [
        (3.0, "Patient reports {sev} {term} in the {site} since {time}."),
        (3.0, "She complains of {sev} {term} affecting her {site}."),
        (3.0, "He describes ongoing {term} in his {site}, worse at night."),
        (2.0, "Today she rated her {term} as {n} out of ten."),
        (2.0, "He is currently experiencing {sev} {term} and asked for analgesia."),
        (1.0, "Reports dabdominal pain after meals for {time}."),
        (1.0, "Complains of achespainodd sensations and pain in the {site}."),
        (0.5, "Advised to call the ward if pain increases overnight."),
        (0.5, "Denying symptoms other than stomach ache this morning."),
    ],
    Label.NEGATED: [
        (3.0, "She denies any {term} in the {site} at present."),
        (3.0, "He denied experiencing {term} when asked directly."),
        (2.0, "Examined today, without {term} or distress."),
        (2.0, "Remains free of {term} since the medication review."),
        (1.0, "Absence of {term} was confirmed on examination."),
    ],
    Label.NOT_RELEVANT: [
        (2.0, "She feared the {term} would come back after discharge."),
        (2.0, "He worried about possible {term} after the procedure."),
        (1.5, "Her father's hip {term} was discussed at length."),
        (1.5, "His mother has a long history of {term}."),
        (1.0, "Wishing to project his pain on others during the session."),
        (1.0, "The bereavement was causing him pain, he said."),
        (1.0, "Leaflet given on the risk of potential pressure sores."),
        (1.0, "?migraine queried in an old referral letter."),
    ],
}

TERMS: dict[Label, list[str]] = {
    Label.RELEVANT: ["pain", "aches", "headache", "backache", "cramps", "soreness", "discomfort", "sciatica", "tenderness"],
    Label.NEGATED: ["pain", "headache", "discomfort", "soreness", "cramps", "aches"],
    Label.NOT_RELEVANT: ["pain", "headache", "migraine", "backache", "arthralgia", "neuralgia"],
}

SITES = ["lower back", "left knee", "neck", "right shoulder", "abdomen", "chest", "legs", "hip", "jaw", "wrist"]
SEVERITIES = ["severe", "mild", "moderate", "constant", "intermittent", "sharp", "dull"]
DURATIONS = ["two days", "a week", "three weeks", "last month", "the weekend", "yesterday"]

FILLER_WORDS = (
    "meeting held afternoon staff discussed housing plans weather garden library shopping transport "
    "appointment letter sent telephone call family visit lunch walk music television breakfast weekend "
    "routine benefits college volunteer friend kitchen laundry budget train park cooking reading "
    "arranged review team office paperwork form update contact number address next week morning "
    "evening tea coffee sandwich bicycle football painting drawing cinema holiday calendar diary "
    "keyworker allotment neighbour council tenancy flat window door stairs lift bag coat umbrella "
    "rain sunshine bread milk newspaper radio quiz crossword puzzle game chess cards knitting sewing "
    "plants flowers seeds compost bus ticket station platform journey map phone charger laptop email"
).split()

SOURCE_TYPES = ("attachment", "event_note")

# Planted sentences sit this many characters apart at minimum, so one
# span's window never reaches the next planted sentence.
_GAP_MIN = DEFAULT_WINDOW + 10
_GAP_MAX = DEFAULT_WINDOW + 120


@dataclass(frozen=True)
class SynthConfig:
    n_docs: int
    n_patients: int | None = None
    annotations_per_patient_mean: float = 8.0
    label_mix: tuple[float, float, float] = (0.72, 0.15, 0.13)
    annotator_noise: float | tuple[float, ...] = 0.0
    seed: int = 0
    n_spans: int | None = None
    # Per-class flip probabilities (relevant, not_relevant, negated); when set,
    # they replace annotator_noise for every annotator.
    class_noise: tuple[float, float, float] | None = None

    def validate(self) -> None:
        if self.n_docs < 1:
            raise PainClfError("n_docs must be >= 1")
        if len(self.label_mix) != 3 or any(p < 0 for p in self.label_mix) or abs(sum(self.label_mix) - 1.0) > 1e-12:
            raise PainClfError(f"label_mix must be three non-negative fractions summing to 1, got {self.label_mix}")
        for p in self.noise_per_annotator():
            if not 0.0 <= p < 0.5:
                raise PainClfError(f"annotator noise must lie in [0, 0.5), got {p}")
        if self.class_noise is not None:
            if len(self.class_noise) != 3 or not all(0.0 <= p < 0.5 for p in self.class_noise):
                raise PainClfError(f"class_noise must be three values in [0, 0.5), got {self.class_noise}")
        if self.patients < 1 or self.patients > self.n_docs:
            raise PainClfError("n_patients must be between 1 and n_docs")
        if self.spans < self.n_docs:
            raise PainClfError(f"{self.spans} spans cannot cover {self.n_docs} documents")

    def noise_per_annotator(self) -> tuple[float, ...]:
        if isinstance(self.annotator_noise, (int, float)):
            return (float(self.annotator_noise),) * len(ANNOTATORS)
        noise = tuple(float(p) for p in self.annotator_noise)
        if len(noise) != len(ANNOTATORS):
            raise PainClfError(f"expected {len(ANNOTATORS)} noise values, got {len(noise)}")
        return noise

    @property
    def patients(self) -> int:
        # Default ratio mirrors roughly 1,985 documents from 723 patients.
        return self.n_patients if self.n_patients is not None else max(1, round(self.n_docs * 723 / 1985))

    @property
    def spans(self) -> int:
        if self.n_spans is not None:
            return self.n_spans
        return max(self.n_docs, round(self.patients * self.annotations_per_patient_mean))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["label_mix"] = list(self.label_mix)
        d["annotator_noise"] = list(self.noise_per_annotator())
        d["n_patients"] = self.patients
        d["n_spans"] = self.spans
        if self.class_noise is not None:
            d["class_noise"] = list(self.class_noise)
        return d


@dataclass
class SynthCorpus:
    config: SynthConfig
    documents: list[Document]
    spans: list[CandidateSpan]
    truth: dict[str, Label]
    annotations: list[list[AnnotationRecord]] = field(default_factory=list)
    templates: dict[str, str] = field(default_factory=dict)

    def all_annotations(self) -> list[AnnotationRecord]:
        """Records interleaved span by span, annotators in fixed order."""
        return [rec for group in zip(*self.annotations) for rec in group]


def _pick(rng: np.random.Generator, items: Sequence):
    return items[int(rng.integers(len(items)))]


def _filler(rng: np.random.Generator, min_chars: int) -> str:
    sentences = []
    size = 0
    while size < min_chars:
        words = [_pick(rng, FILLER_WORDS) for _ in range(int(rng.integers(6, 13)))]
        sentence = " ".join(words).capitalize() + "."
        sentences.append(sentence)
        size += len(sentence) + 1
    return " ".join(sentences)


def _render(rng: np.random.Generator, label: Label) -> tuple[str, str]:
    weights = np.array([w for w, _ in TEMPLATES[label]])
    choice = int(rng.choice(len(weights), p=weights / weights.sum()))
    template = TEMPLATES[label][choice][1]
    sentence = template.format(
        term=_pick(rng, TERMS[label]),
        site=_pick(rng, SITES),
        sev=_pick(rng, SEVERITIES),
        time=_pick(rng, DURATIONS),
        n=int(rng.integers(1, 11)),
    )
    return sentence, template


def simulate_annotator(true_labels: Sequence[Label], noise: float | Sequence[float],
                       rng: np.random.Generator) -> list[Label]:
    """Each label is replaced by a uniformly chosen other label with probability ``noise``.

    ``noise`` may also be a per-class sequence in label order.
    """
    per_class = [float(noise)] * 3 if isinstance(noise, (int, float)) else [float(p) for p in noise]
    flip = {lab: per_class[i] for i, lab in enumerate(LABEL_ORDER)}
    out = []
    for label in true_labels:
        if rng.random() < flip[label]:
            others = [lab for lab in LABEL_ORDER if lab is not label]
            out.append(others[int(rng.integers(len(others)))])
        else:
            out.append(label)
    return out


def sample_labels(n: int, label_mix: Sequence[float], rng: np.random.Generator) -> list[Label]:
    idx = rng.choice(3, size=n, p=np.asarray(label_mix, dtype=np.float64))
    return [LABEL_ORDER[i] for i in idx.tolist()]


def generate_corpus(config: SynthConfig, lexicon: Lexicon | None = None, window: int = DEFAULT_WINDOW) -> SynthCorpus:
    """Generate documents, their candidate spans, true labels and three annotators' labels."""
    config.validate()
    lexicon = lexicon or default_lexicon()
    rng = np.random.default_rng(config.seed)

    n_docs, n_patients, n_spans = config.n_docs, config.patients, config.spans
    patient_of = np.concatenate([np.arange(n_patients), rng.integers(0, n_patients, n_docs - n_patients)])
    spans_per_doc = np.ones(n_docs, dtype=np.int64) + rng.multinomial(n_spans - n_docs, np.full(n_docs, 1.0 / n_docs))
    labels = sample_labels(n_spans, config.label_mix, rng)

    documents: list[Document] = []
    spans: list[CandidateSpan] = []
    truth: dict[str, Label] = {}
    templates: dict[str, str] = {}
    cursor = 0
    for d in range(n_docs):
        doc_id = f"D{d + 1:06d}"
        parts = [_filler(rng, int(rng.integers(40, 240)))]
        planted: list[tuple[int, Label, str]] = []
        offset = len(parts[0]) + 1
        for j in range(int(spans_per_doc[d])):
            if j:
                gap = _filler(rng, int(rng.integers(_GAP_MIN, _GAP_MAX)))
                parts.append(gap)
                offset += len(gap) + 1
            label = labels[cursor]
            cursor += 1
            sentence, template = _render(rng, label)
            parts.append(sentence)
            planted.append((offset, label, template))
            offset += len(sentence) + 1
        parts.append(_filler(rng, int(rng.integers(40, 240))))
        doc = Document(
            doc_id=doc_id,
            text=" ".join(parts),
            patient_id=f"P{int(patient_of[d]) + 1:05d}",
            source_type=_pick(rng, SOURCE_TYPES),
        )
        matches = lexicon.find(doc.text)
        if len(matches) != len(planted):
            raise PainClfError(f"document {doc_id}: planted {len(planted)} mentions but lexicon found {len(matches)}")
        doc_spans = extract_spans(doc, matches, window)
        for span, match, (start, label, template) in zip(doc_spans, matches, planted):
            if not start <= match.start < start + 200:
                raise PainClfError(f"document {doc_id}: match outside its planted sentence")
            truth[span.span_id] = label
            templates[span.span_id] = template
        documents.append(doc)
        spans.extend(doc_spans)

    annotations = []
    true_labels = [truth[s.span_id] for s in spans]
    for annotator, noise in zip(ANNOTATORS, config.noise_per_annotator()):
        observed = simulate_annotator(true_labels, config.class_noise or noise, rng)
        annotations.append([AnnotationRecord(s.span_id, annotator, lab) for s, lab in zip(spans, observed)])
    return SynthCorpus(config, documents, spans, truth, annotations, templates)


def expected_pairwise_agreement(noise: float) -> float:
    """Both annotators right, or both wrong and picking the same one of two labels."""
    return (1.0 - noise) ** 2 + noise**2 / 2.0


def expected_kappa(noise: float, label_mix: Sequence[float] = (0.72, 0.15, 0.13)) -> float:
    """Population Cohen's kappa between two annotators with equal noise."""
    mix = np.asarray(label_mix, dtype=np.float64)
    observed_marginal = mix * (1.0 - noise) + (1.0 - mix) * noise / 2.0
    p_e = float(observed_marginal @ observed_marginal)
    p_o = expected_pairwise_agreement(noise)
    return (p_o - p_e) / (1.0 - p_e)


def simulate_rounds(noise_schedule: Sequence[float], spans_per_round: int = 200,
                    label_mix: Sequence[float] = (0.72, 0.15, 0.13), seed: int = 0) -> list[list[AnnotationRecord]]:
    """Triple-annotated agreement rounds with per-round annotator noise.

    Round ``r`` (1-based) uses ``noise_schedule[r - 1]`` for all three
    annotators, standing in for guidelines improving between rounds.
    """
    rng = np.random.default_rng(seed)
    rounds = []
    for r, noise in enumerate(noise_schedule, start=1):
        truth = sample_labels(spans_per_round, label_mix, rng)
        ids = [f"R{r}-S{i:04d}" for i in range(spans_per_round)]
        records = []
        for annotator in ANNOTATORS:
            observed = simulate_annotator(truth, noise, rng)
            records.extend(AnnotationRecord(s, annotator, lab, r) for s, lab in zip(ids, observed))
        rounds.append(records)
    return rounds


def write_synth(corpus: SynthCorpus, out_dir: str | Path) -> dict[str, str]:
    """Write corpus, spans, annotations, adjudicated gold, truth, lexicon and manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "corpus": "corpus.jsonl",
        "spans": "spans.jsonl",
        "annotations": "annotations.jsonl",
        "gold": "gold.jsonl",
        "truth": "truth.jsonl",
        "lexicon": "lexicon.txt",
    }
    write_corpus(corpus.documents, out / files["corpus"])
    write_spans(corpus.spans, out / files["spans"])
    write_annotations(corpus.all_annotations(), out / files["annotations"])
    write_gold(adjudicate_all(corpus.all_annotations()), out / files["gold"])
    write_records(
        ({"span_id": s.span_id, "label3": corpus.truth[s.span_id].value,
          "label2": 1 if corpus.truth[s.span_id] is Label.RELEVANT else 0,
          "template": corpus.templates[s.span_id]} for s in corpus.spans),
        out / files["truth"],
    )
    lexicon = default_lexicon()
    (out / files["lexicon"]).write_text(
        f"# version: {lexicon.version}\n" + "\n".join(t.surface for t in lexicon.terms) + "\n", encoding="utf-8"
    )
    manifest = {
        "generator": "painclf.synth",
        "config": corpus.config.to_dict(),
        "counts": {"documents": len(corpus.documents), "spans": len(corpus.spans)},
        "files": files,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return files
