import math

import pytest
from scipy import integrate, stats

from boundcorr.errors import InvalidConfigError
from boundcorr.sim import (
    BiasRule,
    SimConfig,
    expected_abs_error,
    generate_corpus,
    load_sim_config,
    oracle_class_means,
    oracle_errors,
    sim_config_from_dict,
    sim_config_to_dict,
    simulate_utterance,
)


def test_same_seed_same_corpus(phoneset, schema):
    cfg = SimConfig(seed=11, utterance_count=5, noise_sigma=0.01, recognition_error_rate=0.05)
    assert generate_corpus(cfg, phoneset, schema) == generate_corpus(cfg, phoneset, schema)
    other = generate_corpus(SimConfig(seed=12, utterance_count=5), phoneset, schema)
    assert other != generate_corpus(SimConfig(seed=11, utterance_count=5), phoneset, schema)


def test_streams_independent_of_count(phoneset, schema):
    small = generate_corpus(SimConfig(seed=3, utterance_count=3), phoneset, schema)
    assert simulate_utterance(2, SimConfig(seed=3, utterance_count=50), phoneset, schema) == small[2]


def test_vowel_bias_exact(phoneset, schema):
    cfg = SimConfig(seed=5, utterance_count=20, bias_rules=[BiasRule({"cur_phone_class": "vowel"}, 0.02)])
    n = 0
    for utt, j, err in oracle_errors(generate_corpus(cfg, phoneset, schema)):
        if phoneset.phone_class(utt.ref.phones[j]) == "vowel":
            assert err == pytest.approx(0.02, abs=1e-9)
            n += 1
        else:
            assert abs(err) < 1e-9
    assert n > 50


def test_oracle_means_equal_biases(phoneset, schema, four_biases):
    cfg = SimConfig(seed=6, utterance_count=30, bias_rules=four_biases)
    means = oracle_class_means(generate_corpus(cfg, phoneset, schema), phoneset, schema,
                               ["cur_phone_class", "syllable_stressed"])
    want = {("vowel", "true"): 0.03, ("vowel", "false"): -0.02,
            ("consonant", "true"): 0.015, ("consonant", "false"): -0.01,
            ("silence", "silence"): 0.0}
    assert set(means) == set(want)
    for k, v in want.items():
        assert means[k] == pytest.approx(v, abs=1e-9)


def test_noisy_mean_within_standard_error(phoneset, schema):
    sigma = 0.02
    cfg = SimConfig(seed=7, utterance_count=60, noise_sigma=sigma,
                    bias_rules=[BiasRule({"cur_phone_class": "vowel"}, 0.02)])
    errs = [e for utt, j, e in oracle_errors(generate_corpus(cfg, phoneset, schema))
            if phoneset.phone_class(utt.ref.phones[j]) == "vowel"]
    se = sigma / math.sqrt(len(errs))
    # 6-decimal rounding adds at most 1 us per boundary
    assert abs(sum(errs) / len(errs) - 0.02) < 4 * se + 2e-6


def test_generated_alignments_valid(phoneset, schema, four_biases):
    cfg = SimConfig(seed=8, utterance_count=40, noise_sigma=0.03, recognition_error_rate=0.1,
                    split_share=0.5, bias_rules=four_biases)
    for utt in generate_corpus(cfg, phoneset, schema):
        assert utt.ref.phones == utt.structure.phones
        assert utt.ref.start == utt.hyp.start == 0.0
        assert utt.ref.end == utt.hyp.end
        for seg in utt.ref.segments + utt.hyp.segments:
            assert seg.end > seg.start


@pytest.mark.parametrize("bias, sigma", [(0.0, 0.02), (0.03, 0.02), (-0.01, 0.005), (0.02, 0.0)])
def test_expected_abs_error_matches_quadrature(bias, sigma):
    if sigma == 0:
        assert expected_abs_error(bias, sigma) == abs(bias)
        return
    val, _ = integrate.quad(lambda x: abs(x) * stats.norm.pdf(x, bias, sigma), -1, 1, points=[0.0])
    assert expected_abs_error(bias, sigma) == pytest.approx(val, rel=1e-9)


def test_config_yaml_roundtrip(tmp_path):
    p = tmp_path / "sim.yaml"
    p.write_text(
        "seed: 3\nutterance_count: 4\nnoise_sigma: 0.01\n"
        "bias_rules:\n  - when: {cur_phone_class: vowel, cur_is_stressed_vowel: true}\n    bias: 0.02\n"
        "  - when: {cur_phone_class: [consonant, silence]}\n    bias: -0.01\n")
    cfg = load_sim_config(p)
    assert cfg.bias_rules[0].when == {"cur_phone_class": "vowel", "cur_is_stressed_vowel": "true"}
    assert cfg.bias_rules[1].when["cur_phone_class"] == ["consonant", "silence"]
    assert sim_config_from_dict(sim_config_to_dict(cfg)) == cfg


@pytest.mark.parametrize("doc", [
    {"utterance_count": 0},
    {"recognition_error_rate": 1.5},
    {"noise_sigma": -1},
    {"mystery": 1},
])
def test_invalid_config(doc, phoneset, schema):
    with pytest.raises(InvalidConfigError):
        generate_corpus(sim_config_from_dict(doc), phoneset, schema)


def test_rule_on_unknown_feature(phoneset, schema):
    cfg = SimConfig(bias_rules=[BiasRule({"shoe_size": 3}, 0.01)])
    with pytest.raises(InvalidConfigError):
        generate_corpus(cfg, phoneset, schema)
