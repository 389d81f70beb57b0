"""Hybrid convolution/attention search space: encoding, decoding, cost models.

An architecture is identified by a fixed-length genome of gene indices, one
gene per searchable hyperparameter. The default space interleaves two
MobileNetV2-style convolution groups with three transformer groups and
spans 1,224,440,064 distinct architectures.

Decoding resolves a genome into a concrete :class:`ArchitectureDescriptor`
with per-stage channels and spatial sizes, from which parameter counts and
multiply-accumulate estimates are computed analytically. All functions here
are pure and safe for concurrent use.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence, Union

import numpy as np

Genome = tuple[int, ...]

CONV_HYPERPARAM_NAMES = ("num_blocks", "expand_ratio", "out_channels")
ATTENTION_HYPERPARAM_NAMES = ("expand_ratio", "channel_mult", "num_heads", "ff_ratio")

# Fixed (non-searched) scaffolding of the default space.
DEFAULT_STEM_CHANNELS = 16
DEFAULT_INPUT_RESOLUTION = 224
DEFAULT_HEAD_CHANNELS = 64
DEFAULT_NUM_CLASSES = 2

ENCODERS_PER_ATTENTION_GROUP = 2

SPACE_SCHEMA_VERSION = 1


class SpaceValidationError(ValueError):
    """A space specification violates a structural invariant."""


class GenomeValidationError(ValueError):
    """A genome does not fit its space; carries the offending gene position."""

    def __init__(self, message: str, position: int | None = None):
        super().__init__(message)
        self.position = position


def _round_half_up(x: float) -> int:
    # Deterministic rounding (ties away from zero for positive inputs),
    # unlike builtin round() which rounds ties to even.
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class HyperparamSpec:
    """One searchable hyperparameter: a short name and its ordered options."""

    name: str
    options: tuple[float, ...]

    def __post_init__(self):
        if len(self.options) < 1:
            raise SpaceValidationError(f"hyperparameter {self.name!r} has no options")
        if any(b <= a for a, b in zip(self.options, self.options[1:])):
            raise SpaceValidationError(
                f"options of {self.name!r} must be strictly increasing: {self.options}"
            )

    @property
    def n_options(self) -> int:
        return len(self.options)


@dataclass(frozen=True)
class BlockGroupSpec:
    """A group of blocks of one kind ("conv" or "attention") and its hyperparameters.

    Convolution groups search (num_blocks, expand_ratio, out_channels);
    attention groups search (expand_ratio, channel_mult, num_heads, ff_ratio).
    """

    kind: str
    hyperparams: tuple[HyperparamSpec, ...]

    def __post_init__(self):
        expected = {
            "conv": CONV_HYPERPARAM_NAMES,
            "attention": ATTENTION_HYPERPARAM_NAMES,
        }.get(self.kind)
        if expected is None:
            raise SpaceValidationError(f"unknown group kind {self.kind!r}")
        names = tuple(hp.name for hp in self.hyperparams)
        if names != expected:
            raise SpaceValidationError(
                f"{self.kind} group must have hyperparams {expected}, got {names}"
            )

    def option(self, name: str, index: int) -> float:
        for hp in self.hyperparams:
            if hp.name == name:
                return hp.options[index]
        raise KeyError(name)


@dataclass(frozen=True)
class SearchSpaceSpec:
    """Full space: ordered block groups plus fixed stem/head scaffolding.

    The stem is a 3x3 stride-2 convolution; the head is a 1x1 convolution to
    ``head_channels`` followed by global average pooling and a linear
    classifier. Group 0 runs at the stem resolution; every later group halves
    the spatial size on entry.
    """

    groups: tuple[BlockGroupSpec, ...]
    stem_channels: int = DEFAULT_STEM_CHANNELS
    input_resolution: int = DEFAULT_INPUT_RESOLUTION
    head_channels: int = DEFAULT_HEAD_CHANNELS
    num_classes: int = DEFAULT_NUM_CLASSES

    def __post_init__(self):
        for name in ("stem_channels", "input_resolution", "head_channels", "num_classes"):
            if getattr(self, name) < 1:
                raise SpaceValidationError(f"{name} must be >= 1")

    @property
    def genome_length(self) -> int:
        return sum(len(g.hyperparams) for g in self.groups)

    @property
    def option_counts(self) -> tuple[int, ...]:
        return tuple(hp.n_options for g in self.groups for hp in g.hyperparams)

    def gene_specs(self) -> Iterator[tuple[int, BlockGroupSpec, HyperparamSpec]]:
        """Yield (group index, group, hyperparam) in genome order."""
        for gi, group in enumerate(self.groups):
            for hp in group.hyperparams:
                yield gi, group, hp


@dataclass(frozen=True)
class UniformGeneSpace:
    """A bare indexed grid with no architectural meaning.

    Useful for benchmark problems (e.g. ZDT over unit vectors) that need a
    discrete genome space but never decode to an architecture. Duck-type
    compatible with :class:`SearchSpaceSpec` wherever only ``option_counts``
    matters (sampling, variation operators, unit-vector features).
    """

    option_counts: tuple[int, ...]

    def __post_init__(self):
        if any(k < 1 for k in self.option_counts):
            raise SpaceValidationError("every gene needs at least one option")

    @property
    def genome_length(self) -> int:
        return len(self.option_counts)


GeneSpace = Union[SearchSpaceSpec, UniformGeneSpace]


def validate_genome(space: GeneSpace, genome: Sequence[int]) -> Genome:
    """Check length and per-gene range; return the genome as a tuple."""
    counts = space.option_counts
    if len(genome) != len(counts):
        raise GenomeValidationError(
            f"genome has {len(genome)} genes, space expects {len(counts)}"
        )
    for i, (g, k) in enumerate(zip(genome, counts)):
        gi = int(g)
        if gi != g or gi < 0 or gi >= k:
            raise GenomeValidationError(
                f"gene {i} = {g!r} out of range for {k} options", position=i
            )
    return tuple(int(g) for g in genome)


def cardinality(space: GeneSpace) -> int:
    """Exact number of distinct genomes (product of per-gene option counts)."""
    total = 1
    for k in space.option_counts:
        total *= k
    return total


def to_unit_vector(space: GeneSpace, genome: Sequence[int]) -> np.ndarray:
    """Map gene indices to [0, 1] coordinates: index / (options - 1).

    Single-option genes map to 0.0. The map is inverted by
    :func:`genome_from_unit` via per-gene rounding.
    """
    g = validate_genome(space, genome)
    counts = space.option_counts
    return np.array(
        [gi / (k - 1) if k > 1 else 0.0 for gi, k in zip(g, counts)], dtype=np.float64
    )


def genome_from_unit(space: GeneSpace, u: Sequence[float]) -> Genome:
    """Round unit-cube coordinates back to the nearest gene indices."""
    counts = space.option_counts
    if len(u) != len(counts):
        raise GenomeValidationError(f"vector has {len(u)} entries, space expects {len(counts)}")
    genes = []
    for ui, k in zip(u, counts):
        idx = _round_half_up(float(ui) * (k - 1)) if k > 1 else 0
        genes.append(min(max(idx, 0), k - 1))
    return tuple(genes)


def encode(space: SearchSpaceSpec, values: Sequence[float]) -> Genome:
    """Inverse of decoding: map concrete per-gene option values to indices."""
    specs = list(space.gene_specs())
    if len(values) != len(specs):
        raise GenomeValidationError(
            f"{len(values)} values given, space has {len(specs)} genes"
        )
    genes = []
    for i, ((_, _, hp), v) in enumerate(zip(specs, values)):
        try:
            genes.append(hp.options.index(v))
        except ValueError:
            raise GenomeValidationError(
                f"gene {i} ({hp.name}): value {v!r} not among options {hp.options}",
                position=i,
            ) from None
    return tuple(genes)


# ---------------------------------------------------------------------------
# Decoded architecture layout
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MbConvLayout:
    """One inverted-residual block: 1x1 expand, 3x3 depthwise, 1x1 project.

    The expand layer is omitted when the expansion ratio is 1. Inner channels
    are the input channels times the expansion ratio. Each convolution is
    followed by a batch norm contributing 2 parameters per channel.
    """

    in_channels: int
    expand_ratio: float
    out_channels: int
    in_size: int
    out_size: int

    @property
    def inner_channels(self) -> int:
        return _round_half_up(self.expand_ratio * self.in_channels)

    def param_count(self) -> int:
        inner = self.inner_channels
        p = 0
        if self.expand_ratio != 1:
            p += self.in_channels * inner + 2 * inner
        p += 9 * inner + 2 * inner
        p += inner * self.out_channels + 2 * self.out_channels
        return p

    def flops(self) -> float:
        # MACs: conv weights (batch norm excluded) times output spatial area.
        inner = self.inner_channels
        f = 0.0
        if self.expand_ratio != 1:
            f += self.in_channels * inner * self.in_size**2
        f += 9 * inner * self.out_size**2
        f += inner * self.out_channels * self.out_size**2
        return f


@dataclass(frozen=True)
class ConvStageLayout:
    """A convolution group: ``num_blocks`` MBConv blocks at one resolution."""

    blocks: tuple[MbConvLayout, ...]

    @property
    def out_channels(self) -> int:
        return self.blocks[-1].out_channels

    @property
    def out_size(self) -> int:
        return self.blocks[-1].out_size

    def param_count(self) -> int:
        return sum(b.param_count() for b in self.blocks)

    def flops(self) -> float:
        return sum(b.flops() for b in self.blocks)


@dataclass(frozen=True)
class AttentionStageLayout:
    """An attention group in the MobileViT mold.

    An MV2-style block (carrying the searched expand ratio and, past group 0,
    the stride-2 downsample) feeds a 3x3 local convolution, a 1x1 projection
    to the transformer width, ``num_encoders`` transformer encoder layers,
    and a 1x1 projection back to the group channel count. Tokens are the
    spatial positions at this stage. The transformer width is the channel
    multiplier times the input channels, rounded half-up and then raised to
    the next multiple of the head count.
    """

    pre_block: MbConvLayout
    channels: int
    embed_dim: int
    num_heads: int
    ff_hidden_dim: int
    out_size: int
    num_encoders: int = ENCODERS_PER_ATTENTION_GROUP

    @property
    def out_channels(self) -> int:
        return self.channels

    @property
    def tokens(self) -> int:
        return self.out_size**2

    def _encoder_params(self) -> int:
        d, h = self.embed_dim, self.ff_hidden_dim
        attention = 4 * d * d + 4 * d
        feed_forward = 2 * d * h + h + d
        layer_norms = 4 * d
        return attention + feed_forward + layer_norms

    def param_count(self) -> int:
        c, d = self.channels, self.embed_dim
        p = self.pre_block.param_count()
        p += 9 * c * c + 2 * c          # local 3x3 conv + bn
        p += c * d + 2 * d              # project in + bn
        p += self.num_encoders * self._encoder_params()
        p += d * c + 2 * c              # project back + bn
        return p

    def flops(self) -> float:
        c, d, h, n = self.channels, self.embed_dim, self.ff_hidden_dim, self.tokens
        area = self.out_size**2
        f = self.pre_block.flops()
        f += 9 * c * c * area
        f += c * d * area
        # Per encoder: qkv/output projections, the two n x n attention
        # matmuls, and the feed-forward pair; weights times token count.
        f += self.num_encoders * (4 * d * d * n + 2 * d * n * n + 2 * d * h * n)
        f += d * c * area
        return f


StageLayout = Union[ConvStageLayout, AttentionStageLayout]


@dataclass(frozen=True)
class ArchitectureDescriptor:
    """A fully resolved architecture: stem, searched stages, classifier head."""

    stem_channels: int
    stem_size: int
    input_resolution: int
    stages: tuple[StageLayout, ...]
    head_in_channels: int
    head_channels: int
    head_size: int
    num_classes: int
    gene_values: tuple[float, ...] = field(default=())

    def stage_sizes(self) -> tuple[int, ...]:
        return tuple(s.out_size for s in self.stages)


def decode(space: SearchSpaceSpec, genome: Sequence[int]) -> ArchitectureDescriptor:
    """Resolve a genome into concrete per-stage channels and spatial sizes."""
    g = validate_genome(space, genome)
    values: list[float] = []
    stages: list[StageLayout] = []

    channels = space.stem_channels
    size = math.ceil(space.input_resolution / 2)
    stem_size = size

    pos = 0
    for gi, group in enumerate(space.groups):
        picks = {}
        for hp in group.hyperparams:
            v = hp.options[g[pos]]
            picks[hp.name] = v
            values.append(v)
            pos += 1

        in_size = size
        if gi > 0:
            size = math.ceil(size / 2)

        if group.kind == "conv":
            n_blocks = int(picks["num_blocks"])
            t = picks["expand_ratio"]
            out_ch = int(picks["out_channels"])
            blocks = [MbConvLayout(channels, t, out_ch, in_size, size)]
            blocks += [
                MbConvLayout(out_ch, t, out_ch, size, size) for _ in range(n_blocks - 1)
            ]
            stages.append(ConvStageLayout(tuple(blocks)))
            channels = out_ch
        else:
            t = picks["expand_ratio"]
            heads = int(picks["num_heads"])
            d0 = _round_half_up(picks["channel_mult"] * channels)
            d = heads * math.ceil(d0 / heads)
            ff_hidden = _round_half_up(picks["ff_ratio"] * d)
            pre = MbConvLayout(channels, t, channels, in_size, size)
            stages.append(
                AttentionStageLayout(
                    pre_block=pre,
                    channels=channels,
                    embed_dim=d,
                    num_heads=heads,
                    ff_hidden_dim=ff_hidden,
                    out_size=size,
                )
            )

    return ArchitectureDescriptor(
        stem_channels=space.stem_channels,
        stem_size=stem_size,
        input_resolution=space.input_resolution,
        stages=tuple(stages),
        head_in_channels=channels,
        head_channels=space.head_channels,
        head_size=size,
        num_classes=space.num_classes,
        gene_values=tuple(values),
    )


def param_count(d: ArchitectureDescriptor) -> int:
    """Total learnable parameters, summed layer by layer.

    Stem: 3x3 conv from RGB plus batch norm. Head: 1x1 conv to the head
    width plus batch norm, then a biased linear classifier after pooling.
    """
    p = 9 * 3 * d.stem_channels + 2 * d.stem_channels
    p += sum(s.param_count() for s in d.stages)
    p += d.head_in_channels * d.head_channels + 2 * d.head_channels
    p += d.head_channels * d.num_classes + d.num_classes
    return p


def flops_estimate(d: ArchitectureDescriptor) -> float:
    """Multiply-accumulate estimate: conv weights times output area, plus
    token-count scaled transformer terms."""
    f = float(9 * 3 * d.stem_channels * d.stem_size**2)
    f += sum(s.flops() for s in d.stages)
    f += d.head_in_channels * d.head_channels * d.head_size**2
    f += d.head_channels * d.num_classes
    return f


# ---------------------------------------------------------------------------
# Serialization and presets
# ---------------------------------------------------------------------------


def default_space() -> SearchSpaceSpec:
    """The built-in hybrid space: 2 conv groups then 3 attention groups."""
    conv = BlockGroupSpec(
        kind="conv",
        hyperparams=(
            HyperparamSpec("num_blocks", (1, 2, 3, 4)),
            HyperparamSpec("expand_ratio", (1, 2, 4)),
            HyperparamSpec("out_channels", (8, 16, 24, 32)),
        ),
    )
    attention = BlockGroupSpec(
        kind="attention",
        hyperparams=(
            HyperparamSpec("expand_ratio", (1, 2, 4)),
            HyperparamSpec("channel_mult", (1.0, 1.5, 2.0)),
            HyperparamSpec("num_heads", (1, 2, 4)),
            HyperparamSpec("ff_ratio", (1.0, 1.5, 2.0)),
        ),
    )
    return SearchSpaceSpec(groups=(conv, conv, attention, attention, attention))


PRESETS = {"hytnas-default": default_space}


def space_to_dict(space: SearchSpaceSpec) -> dict:
    return {
        "schema_version": SPACE_SCHEMA_VERSION,
        "stem_channels": space.stem_channels,
        "input_resolution": space.input_resolution,
        "head_channels": space.head_channels,
        "num_classes": space.num_classes,
        "groups": [
            {
                "kind": g.kind,
                "hyperparams": [
                    {"name": hp.name, "options": list(hp.options)} for hp in g.hyperparams
                ],
            }
            for g in space.groups
        ],
    }


def space_from_dict(data: dict) -> SearchSpaceSpec:
    try:
        groups = tuple(
            BlockGroupSpec(
                kind=g["kind"],
                hyperparams=tuple(
                    HyperparamSpec(hp["name"], tuple(hp["options"]))
                    for hp in g["hyperparams"]
                ),
            )
            for g in data["groups"]
        )
        return SearchSpaceSpec(
            groups=groups,
            stem_channels=int(data.get("stem_channels", DEFAULT_STEM_CHANNELS)),
            input_resolution=int(data.get("input_resolution", DEFAULT_INPUT_RESOLUTION)),
            head_channels=int(data.get("head_channels", DEFAULT_HEAD_CHANNELS)),
            num_classes=int(data.get("num_classes", DEFAULT_NUM_CLASSES)),
        )
    except (KeyError, TypeError) as exc:
        raise SpaceValidationError(f"malformed space document: {exc}") from exc


def space_to_json(space: SearchSpaceSpec) -> str:
    return json.dumps(space_to_dict(space), indent=2)


def space_from_json(text: str) -> SearchSpaceSpec:
    return space_from_dict(json.loads(text))


def load_space(name_or_path: str) -> SearchSpaceSpec:
    """Resolve a preset name or a JSON file path to a space."""
    if name_or_path in PRESETS:
        return PRESETS[name_or_path]()
    path = Path(name_or_path)
    if not path.exists():
        raise SpaceValidationError(
            f"unknown space {name_or_path!r}: not a preset ({', '.join(PRESETS)}) "
            "and no such file"
        )
    return space_from_json(path.read_text(encoding="utf-8"))
