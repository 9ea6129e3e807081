import sys

import pytest
from hypothesis import given
from hypothesis import strategies as st

from trilemma_eval.genbench import (
    GeneratorAdapter,
    benchmark_generator,
    generate,
    sampling_speed,
)


class TestSamplingSpeed:
    def test_unit_cases(self):
        assert sampling_speed(128, 10.0) == 12.8
        assert sampling_speed(16, 100.0) == 0.16
        assert sampling_speed(1, 1.0) == 1.0

    def test_nonpositive_time_rejected(self):
        with pytest.raises(ValueError):
            sampling_speed(10, 0.0)
        with pytest.raises(ValueError):
            sampling_speed(10, -1.0)

    @given(
        c=st.integers(1, 10_000),
        t=st.floats(1e-6, 1e6, allow_nan=False),
        k=st.integers(1, 1000),
    )
    def test_scale_invariance(self, c, t, k):
        base = sampling_speed(c, t)
        scaled = sampling_speed(k * c, k * t)
        assert abs(base - scaled) / base < 1e-9


class TestStubAdapter:
    def test_deterministic_outputs(self, tmp_path):
        stub = GeneratorAdapter(kind="stub", per_sample_delay=0.0, image_hw=(6, 6), seed=4)
        generate(stub, 3, tmp_path / "a")
        generate(stub, 3, tmp_path / "b")
        for name in ("000000.png", "000002.png"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_benchmark_counts_and_lower_bound(self, tmp_path):
        stub = GeneratorAdapter(kind="stub", per_sample_delay=0.004, image_hw=(6, 6), seed=1)
        result = benchmark_generator(stub, count=25, warmup=2, work_dir=tmp_path)
        assert result.count == 25
        assert result.elapsed_seconds >= 25 * 0.004
        assert len(list(result.samples_dir.glob("*.png"))) == 25

    def test_count_precondition(self, tmp_path):
        stub = GeneratorAdapter(kind="stub")
        with pytest.raises(ValueError, match="count"):
            benchmark_generator(stub, count=0, work_dir=tmp_path)

    def test_negative_delay_rejected(self):
        with pytest.raises(ValueError):
            GeneratorAdapter(kind="stub", per_sample_delay=-1.0)


class TestExternalAdapter:
    def test_template_placeholders_required(self):
        with pytest.raises(ValueError, match="outdir"):
            GeneratorAdapter(kind="external-command", command_template="gen --n {count}")

    def test_count_mismatch_detected(self, tmp_path):
        # command ignores {count} and writes nothing
        adapter = GeneratorAdapter(
            kind="external-command",
            command_template=f"{sys.executable} -c pass # {{count}} {{outdir}}",
        )
        with pytest.raises(RuntimeError, match="expected 4 generated PNGs, found 0"):
            benchmark_generator(adapter, count=4, warmup=0, work_dir=tmp_path)

    def test_nonzero_exit_reported(self, tmp_path):
        adapter = GeneratorAdapter(
            kind="external-command",
            command_template=(
                f'{sys.executable} -c "import sys; sys.exit(3)" # {{count}} {{outdir}}'
            ),
        )
        with pytest.raises(RuntimeError, match="exit 3"):
            benchmark_generator(adapter, count=1, warmup=0, work_dir=tmp_path)

    def test_undecodable_output_detected(self, tmp_path):
        script = (
            "import sys, pathlib; out = pathlib.Path(sys.argv[1]); "
            "out.mkdir(parents=True, exist_ok=True); "
            "[(out / f'{i}.png').write_bytes(b'garbage') for i in range(int(sys.argv[2]))]"
        )
        script_path = tmp_path / "fakegen.py"
        script_path.write_text(script)
        adapter = GeneratorAdapter(
            kind="external-command",
            command_template=f"{sys.executable} {script_path} {{outdir}} {{count}}",
        )
        with pytest.raises(RuntimeError, match="not a decodable PNG"):
            benchmark_generator(adapter, count=2, warmup=0, work_dir=tmp_path)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            GeneratorAdapter(kind="teleport")
