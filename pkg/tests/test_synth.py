import numpy as np
import pytest

from modules.errors import DomainError
from modules.event_io import EventStream
from modules.synth import (
    LABEL_NOISE,
    LABEL_SIGNAL,
    LabeledEventStream,
    SceneObject,
    SynthConfig,
    evaluate,
    generate,
    match_kept_indices,
    read_labels,
    write_labels,
)


def test_no_noise_means_all_signal():
    labeled = generate(SynthConfig(noise_fraction=0.0, duration=1000))

    assert len(labeled) == 1000
    assert (labeled.labels == LABEL_SIGNAL).all()


def test_same_seed_same_scene():
    a = generate(SynthConfig(seed=3, duration=2000))
    b = generate(SynthConfig(seed=3, duration=2000))

    assert a.stream == b.stream
    assert np.array_equal(a.labels, b.labels)


def test_different_seed_differs():
    a = generate(SynthConfig(seed=3, duration=2000))
    b = generate(SynthConfig(seed=4, duration=2000))

    assert a.stream != b.stream


def test_noise_count_formula():
    labeled = generate(SynthConfig(duration=700, signal_rate=1.0, noise_fraction=0.3))

    assert int((labeled.labels == LABEL_SIGNAL).sum()) == 700
    assert int((labeled.labels == LABEL_NOISE).sum()) == 300


@pytest.mark.parametrize("obj", list(SceneObject))
def test_scene_stays_on_sensor(obj):
    config = SynthConfig(object=obj, width=48, height=32, duration=3000, velocity=(0.02, 0.01))

    labeled = generate(config)
    stream = labeled.stream

    assert stream.sorted_by_time
    assert stream.x.min() >= 0 and stream.x.max() < 48
    assert stream.y.min() >= 0 and stream.y.max() < 32
    assert stream.t.min() >= 0 and stream.t.max() < 3000
    assert set(stream.p.tolist()) <= {-1, 1}


def test_bar_leading_edge_is_on():
    labeled = generate(SynthConfig(noise_fraction=0.0, velocity=(0.004, 0.0), duration=2000))
    stream = labeled.stream
    centre = 32 + 0.004 * (stream.t - 1000)

    ahead = stream.x > centre
    assert (stream.p[ahead] == 1).all()
    assert (stream.p[stream.x < centre - 1] == -1).all()


def test_evaluate_keep_everything():
    labeled = generate(SynthConfig(duration=1000))

    metrics = evaluate(labeled, np.arange(len(labeled)))

    assert metrics.recall == 1.0
    assert metrics.noise_removed_fraction == 0.0
    assert metrics.output_noise_fraction == pytest.approx(metrics.input_noise_fraction)


def test_evaluate_noise_free_scene_removes_nothing():
    labeled = generate(SynthConfig(noise_fraction=0.0, duration=500))

    metrics = evaluate(labeled, np.arange(len(labeled)))

    assert metrics.noise_removed_fraction == 0.0
    assert (metrics.precision, metrics.recall) == (1.0, 1.0)
    assert metrics.input_noise_fraction == 0.0


def test_evaluate_keep_signal_only():
    labeled = generate(SynthConfig(duration=1000))

    metrics = evaluate(labeled, np.flatnonzero(labeled.signal_mask))

    assert (metrics.precision, metrics.recall, metrics.noise_removed_fraction) == (1.0, 1.0, 1.0)
    assert metrics.output_noise_fraction == 0.0


def test_evaluate_matches_set_counts():
    labeled = generate(SynthConfig(duration=800, seed=6))
    rng = np.random.Generator(np.random.PCG64(6))
    kept = rng.choice(len(labeled), size=len(labeled) // 2, replace=False)

    metrics = evaluate(labeled, kept)

    signal = set(np.flatnonzero(labeled.signal_mask).tolist())
    noise = set(range(len(labeled))) - signal
    kept_set = set(kept.tolist())
    assert metrics.signal_kept == len(kept_set & signal)
    assert metrics.noise_kept == len(kept_set & noise)
    assert metrics.precision == pytest.approx(len(kept_set & signal) / len(kept_set))
    assert metrics.recall == pytest.approx(len(kept_set & signal) / len(signal))
    assert metrics.noise_removed_fraction == pytest.approx(len(noise - kept_set) / len(noise))
    assert metrics.signal_kept + metrics.signal_removed + metrics.noise_kept + metrics.noise_removed == len(labeled)


def test_evaluate_empty_kept_set():
    labeled = generate(SynthConfig(duration=500))

    metrics = evaluate(labeled, [])

    assert metrics.recall == 0.0
    assert metrics.precision == 1.0
    assert metrics.output_noise_fraction == 0.0


def test_evaluate_rejects_out_of_range():
    labeled = generate(SynthConfig(duration=100))

    with pytest.raises(DomainError):
        evaluate(labeled, [len(labeled)])


def test_labels_round_trip():
    labels = np.array([1, 0, 0, 1, 1], dtype=np.int8)

    assert write_labels(labels) == b"1\n0\n0\n1\n1\n"
    assert read_labels(write_labels(labels)).tolist() == labels.tolist()


def test_read_labels_rejects_other_values():
    with pytest.raises(DomainError):
        read_labels(b"1\n2\n")


def test_labeled_stream_length_mismatch():
    with pytest.raises(ValueError):
        LabeledEventStream(stream=EventStream(x=[0], y=[0], t=[0], p=[1]), labels=[1, 0])


def test_match_kept_indices_handles_duplicates():
    original = EventStream(x=[1, 1, 2, 1], y=[0, 0, 0, 0], t=[5, 5, 6, 5], p=[1, 1, -1, 1])
    denoised = EventStream(x=[1, 2, 1], y=[0, 0, 0], t=[5, 6, 5], p=[1, -1, 1])

    assert match_kept_indices(original, denoised).tolist() == [0, 1, 2]


def test_match_kept_indices_rejects_foreign_event():
    original = EventStream(x=[1], y=[0], t=[5], p=[1])
    denoised = EventStream(x=[9], y=[0], t=[5], p=[1])

    with pytest.raises(DomainError):
        match_kept_indices(original, denoised)


def test_config_rejects_full_noise():
    with pytest.raises(ValueError):
        SynthConfig(noise_fraction=1.0)
