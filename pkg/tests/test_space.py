import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hytsearch.space import (
    BlockGroupSpec,
    GenomeValidationError,
    HyperparamSpec,
    MbConvLayout,
    SearchSpaceSpec,
    SpaceValidationError,
    UniformGeneSpace,
    cardinality,
    decode,
    default_space,
    encode,
    flops_estimate,
    genome_from_unit,
    load_space,
    param_count,
    space_from_json,
    space_to_json,
    to_unit_vector,
    validate_genome,
)


def conv_group(**overrides):
    options = {
        "num_blocks": (1, 2, 3, 4),
        "expand_ratio": (1, 2, 4),
        "out_channels": (8, 16, 24, 32),
    }
    options.update(overrides)
    return BlockGroupSpec(
        "conv", tuple(HyperparamSpec(k, v) for k, v in options.items())
    )


def genomes_of(space):
    return st.tuples(*(st.integers(0, k - 1) for k in space.option_counts))


DEFAULT = default_space()


class TestCardinality:
    def test_default_space_exact(self):
        assert cardinality(DEFAULT) == 1_224_440_064
        assert 1.15e9 <= cardinality(DEFAULT) <= 1.25e9

    def test_single_option_space(self):
        assert cardinality(UniformGeneSpace((1, 1, 1))) == 1

    def test_product_rule(self):
        assert cardinality(UniformGeneSpace((3, 4))) == 12

    def test_genome_length(self):
        assert DEFAULT.genome_length == 18


class TestDecode:
    def test_all_zero_genome(self):
        d = decode(DEFAULT, (0,) * 18)
        conv0, conv1, attn0 = d.stages[0], d.stages[1], d.stages[2]
        assert len(conv0.blocks) == 1
        assert conv0.blocks[0].expand_ratio == 1
        assert conv0.out_channels == 8
        assert len(conv1.blocks) == 1
        assert attn0.pre_block.expand_ratio == 1
        assert attn0.embed_dim == 8  # 1x multiplier on 8 channels
        assert attn0.num_heads == 1
        assert attn0.ff_hidden_dim == 8

    def test_num_blocks_gene(self):
        g = [0] * 18
        g[0] = 3  # first conv group's block-count gene
        d = decode(DEFAULT, tuple(g))
        assert len(d.stages[0].blocks) == 4

    def test_out_of_range_gene(self):
        g = [0] * 18
        g[9] = 9
        with pytest.raises(GenomeValidationError) as err:
            decode(DEFAULT, tuple(g))
        assert err.value.position == 9
        assert "gene 9" in str(err.value)

    def test_stage_sizes_non_increasing(self):
        d = decode(DEFAULT, (0,) * 18)
        sizes = d.stage_sizes()
        assert sizes == (112, 56, 28, 14, 7)
        assert all(a >= b for a, b in zip(sizes, sizes[1:]))

    @given(genomes_of(DEFAULT))
    @settings(max_examples=50, deadline=None)
    def test_embed_dim_divisible_by_heads(self, genome):
        d = decode(DEFAULT, genome)
        for stage in d.stages:
            if hasattr(stage, "embed_dim"):
                assert stage.embed_dim % stage.num_heads == 0

    @given(genomes_of(DEFAULT))
    @settings(max_examples=50, deadline=None)
    def test_encode_round_trip(self, genome):
        d = decode(DEFAULT, genome)
        assert encode(DEFAULT, d.gene_values) == genome


class TestUnitVector:
    def test_bounds_and_midpoint(self):
        space = UniformGeneSpace((4, 4, 3))
        assert to_unit_vector(space, (0, 3, 1)).tolist() == [0.0, 1.0, 0.5]

    def test_single_option_gene_maps_to_zero(self):
        space = UniformGeneSpace((1, 2))
        assert to_unit_vector(space, (0, 1)).tolist() == [0.0, 1.0]

    @given(genomes_of(DEFAULT))
    @settings(max_examples=50, deadline=None)
    def test_round_trip_by_rounding(self, genome):
        u = to_unit_vector(DEFAULT, genome)
        assert genome_from_unit(DEFAULT, u) == genome


class TestParamCount:
    def test_single_mbconv_hand_sum(self):
        block = MbConvLayout(
            in_channels=16, expand_ratio=1, out_channels=16, in_size=8, out_size=8
        )
        # depthwise 9*16 + 32 = 176, project 16*16 + 32 = 288
        assert block.param_count() == 176 + 288 == 464

    def test_empty_groups_is_stem_plus_head(self):
        space = SearchSpaceSpec(
            groups=(), stem_channels=8, input_resolution=14, head_channels=8
        )
        d = decode(space, ())
        stem = 9 * 3 * 8 + 2 * 8
        head = 8 * 8 + 2 * 8 + 8 * 2 + 2
        assert param_count(d) == stem + head

    def test_all_zero_genome_golden(self):
        # layer-by-layer hand sum:
        stem = 9 * 3 * 16 + 2 * 16                                   # 464
        conv0 = (9 * 16 + 2 * 16) + (16 * 8 + 2 * 8)                 # 320
        conv1 = (9 * 8 + 2 * 8) + (8 * 8 + 2 * 8)                    # 168
        pre = (9 * 8 + 2 * 8) + (8 * 8 + 2 * 8)                      # mv2 block, 168
        local = 9 * 8 * 8 + 2 * 8                                    # 592
        proj_in = 8 * 8 + 2 * 8                                      # 80
        encoder = (4 * 64 + 4 * 8) + (2 * 8 * 8 + 8 + 8) + 4 * 8     # 464
        proj_out = 8 * 8 + 2 * 8                                     # 80
        attn = pre + local + proj_in + 2 * encoder + proj_out        # 1848
        head = 8 * 64 + 2 * 64 + 64 * 2 + 2                          # 770
        expected = stem + conv0 + conv1 + 3 * attn + head
        assert expected == 7266
        assert param_count(decode(DEFAULT, (0,) * 18)) == expected

    def test_monotone_in_blocks_channels_expand(self):
        # raising a block-count, out-channel, or expand-ratio gene (others
        # fixed) never shrinks the model
        size_genes = [
            pos
            for pos, (_, _, hp) in enumerate(DEFAULT.gene_specs())
            if hp.name in ("num_blocks", "out_channels", "expand_ratio")
        ]
        rng = np.random.default_rng(0)
        counts = DEFAULT.option_counts
        for _ in range(8):
            base = [int(rng.integers(k)) for k in counts]
            for gene in size_genes:
                params = []
                for idx in range(counts[gene]):
                    g = list(base)
                    g[gene] = idx
                    params.append(param_count(decode(DEFAULT, tuple(g))))
                assert params == sorted(params), f"gene {gene}: {params}"

    def test_positive_and_deterministic(self):
        g = (3, 2, 3, 1, 0, 2, 2, 1, 2, 0, 1, 1, 1, 2, 2, 0, 1, 2)
        d = decode(DEFAULT, g)
        assert param_count(d) > 0
        assert flops_estimate(d) > 0
        assert param_count(d) == param_count(decode(DEFAULT, g))
        assert flops_estimate(d) == flops_estimate(decode(DEFAULT, g))


class TestFlops:
    def test_pointwise_conv_macs(self):
        # head conv: 1x1, 8 -> 8 channels on a 7x7 map = 8*8*49 MACs
        space = SearchSpaceSpec(
            groups=(), stem_channels=8, input_resolution=14, head_channels=8
        )
        d = decode(space, ())
        stem = 27 * 8 * 7**2
        linear = 8 * 2
        assert flops_estimate(d) - stem - linear == 8 * 8 * 49 == 3136

    def test_doubling_head_channels_doubles_head_conv_macs(self):
        def head_conv_macs(head_channels):
            space = SearchSpaceSpec(
                groups=(), stem_channels=8, input_resolution=14,
                head_channels=head_channels,
            )
            d = decode(space, ())
            return flops_estimate(d) - 27 * 8 * 49 - head_channels * 2

        assert head_conv_macs(16) == 2 * head_conv_macs(8)

    def test_empty_descriptor_stem_head_only(self):
        space = SearchSpaceSpec(
            groups=(), stem_channels=8, input_resolution=14, head_channels=8
        )
        d = decode(space, ())
        assert flops_estimate(d) == 27 * 8 * 49 + 3136 + 16


class TestValidation:
    def test_wrong_length(self):
        with pytest.raises(GenomeValidationError):
            validate_genome(DEFAULT, (0,) * 17)

    def test_conv_group_needs_three_hyperparams(self):
        with pytest.raises(SpaceValidationError):
            BlockGroupSpec("conv", (HyperparamSpec("num_blocks", (1, 2)),))

    def test_attention_group_needs_four_hyperparams(self):
        with pytest.raises(SpaceValidationError):
            BlockGroupSpec(
                "attention",
                (
                    HyperparamSpec("expand_ratio", (1, 2)),
                    HyperparamSpec("channel_mult", (1.0, 2.0)),
                    HyperparamSpec("num_heads", (1, 2)),
                ),
            )

    def test_options_strictly_increasing(self):
        with pytest.raises(SpaceValidationError):
            HyperparamSpec("num_blocks", (1, 1, 2))

    def test_options_non_empty(self):
        with pytest.raises(SpaceValidationError):
            HyperparamSpec("num_blocks", ())

    def test_unknown_group_kind(self):
        with pytest.raises(SpaceValidationError):
            BlockGroupSpec("pooling", ())


class TestSerialization:
    def test_json_round_trip(self):
        assert space_from_json(space_to_json(DEFAULT)) == DEFAULT

    def test_preset_lookup(self):
        assert load_space("hytnas-default") == DEFAULT

    def test_unknown_preset(self):
        with pytest.raises(SpaceValidationError):
            load_space("no-such-preset")

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "space.json"
        path.write_text(space_to_json(DEFAULT), encoding="utf-8")
        assert load_space(str(path)) == DEFAULT

    def test_malformed_document(self):
        with pytest.raises(SpaceValidationError):
            space_from_json(json.dumps({"groups": [{"kind": "conv"}]}))
