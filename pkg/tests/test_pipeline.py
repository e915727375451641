import numpy as np
import pytest
from _toys import two_site_data

from sitelasso.ensemble import model_average
from sitelasso.errors import DataError
from sitelasso.pipeline import (
    COMBINED,
    covariate_support_report,
    evaluate_transfer,
    run_method1,
    run_method2,
    run_method3,
    run_method4,
    write_method_comparison_csv,
    write_support_csv,
)
from sitelasso.splits import make_splits
from sitelasso.models import FitMetrics
from sitelasso.terms import parse_term_id


@pytest.fixture(scope="module")
def setup():
    data = two_site_data(seed=5)
    plan = make_splits(data, {"A": 15, "B": 12}, n_splits=25, seed=7)
    return data, plan


def test_method1_fits_its_site_only(setup):
    data, plan = setup
    run = run_method1(data, "A", plan)
    assert run.method == "m1" and run.site == "A"
    assert np.array_equal(run.row_ids, data.site_rows("A"))
    assert set(run.metrics) == {"A"}
    assert run.metrics["A"].r2 > 0.6  # strong signal, should fit easily
    with pytest.raises(DataError):
        run_method1(data, "nope", plan)


def test_method2_reports_all_targets(setup):
    data, plan = setup
    run = run_method2(data, plan)
    assert set(run.metrics) == {"A", "B", COMBINED}
    assert run.metrics[COMBINED].r2 > 0.6
    assert all(t.scope is None for t in run.terms)


def test_method4_contains_method2_columns(setup):
    data, plan = setup
    m2 = run_method2(data, plan)
    m4 = run_method4(data, plan)
    w = len(m2.terms)
    assert len(m4.terms) == 3 * w
    assert [t.term_id for t in m4.terms[:w]] == [t.term_id for t in m2.terms]
    scopes = {t.scope for t in m4.terms[w:]}
    assert scopes == {"A", "B"}
    assert set(m4.metrics) == {"A", "B", COMBINED}


def test_method3_decomposes_into_stage_sums(setup):
    data, plan = setup
    m2 = run_method2(data, plan)
    m3 = run_method3(data, plan, stage1=m2)
    assert m3.stage1 is m2  # supplied stage 1 is used, not refitted
    # independent recomputation of the amendment per site
    for site, ens in m3.stage2.items():
        rows = data.site_rows(site)
        full_ids = [t.term_id for t in ens.terms]
        assert full_ids == [t.term_id for t in m2.terms]  # reused term set
        from sitelasso.features import expand_terms

        design = expand_terms(data).subset_terms(
            [i for i, cid in enumerate(expand_terms(data).column_ids) if cid in set(full_ids)]
        ).subset_rows(rows)
        amend = model_average(ens, design)
        gap = m3.predictions[rows] - m2.predictions[rows]
        assert np.allclose(gap, amend, atol=1e-12)
    assert set(m3.metrics) == {"A", "B", COMBINED}
    assert m3.metrics_oos is not None and m3.predictions_oos is not None
    # amending residuals in-sample can only tighten the combined fit
    assert m3.metrics[COMBINED].r2 >= m2.metrics[COMBINED].r2 - 1e-9


def test_transfer_uses_source_transforms_unchanged(setup):
    data, plan = setup
    source = run_method1(data, "A", plan)
    checksums_before = [t.transform_id for t in source.ensemble.transforms]
    weights_before = source.ensemble.weights.copy()
    target = data.subset(data.site_rows("B"))
    result = evaluate_transfer(source, target)
    assert [t.transform_id for t in source.ensemble.transforms] == checksums_before
    assert np.array_equal(source.ensemble.weights, weights_before)
    assert result.source_site == "A" and result.target_site == "B"
    assert result.predictions.shape == (target.n_rows,)
    assert np.isfinite(result.metrics.r2)
    m2 = run_method2(data, plan)
    with pytest.raises(DataError):
        evaluate_transfer(m2, target)


def test_transfer_missing_covariate_errors(setup):
    data, plan = setup
    source = run_method1(data, "A", plan)
    target = data.subset(data.site_rows("B"))
    stripped = type(target)(
        target.site_ids,
        target.x,
        target.y,
        target.response,
        target.covariate_names[:1],
        target.covariate_values[:, :1],
    )
    needed = source.ensemble.needed_covariates()
    if all(c == "c0" for c in needed):
        pytest.skip("models only used c0; cannot exercise the error")
    with pytest.raises(DataError, match="covariate"):
        evaluate_transfer(source, stripped)


def test_support_report_flags_disjoint_ranges():
    data = two_site_data(seed=9, shift=25.0)  # site A far outside site B on c0
    report = covariate_support_report(data, [parse_term_id("c0"), parse_term_id("c1")])
    by_key = {(r.term, r.site): r for r in report}
    assert by_key[("c0", "A")].outside_other_range
    assert by_key[("c0", "B")].outside_other_range
    assert not by_key[("c1", "A")].outside_other_range
    assert not by_key[("c1", "B")].outside_other_range
    # pooled standardization: mean 0, unit magnitude
    row = by_key[("c0", "A")]
    assert row.minimum < row.q25 <= row.median <= row.q75 < row.maximum


def test_support_csv_and_comparison_csv(tmp_path):
    data = two_site_data(seed=11)
    report = covariate_support_report(data, [parse_term_id("c0")])
    out = tmp_path / "support.csv"
    write_support_csv(out, report)
    text = out.read_text().splitlines()
    assert text[0].startswith("term,site,min,q25")
    assert len(text) == 3
    table = {
        "m1-a": {"A": FitMetrics(0.51, 0.11, 22)},
        "m2": {"A": FitMetrics(0.74, 0.1, 22), "B": FitMetrics(0.58, 0.2, 18), COMBINED: FitMetrics(0.7, 0.16, 40)},
    }
    cmp_path = tmp_path / "metrics.csv"
    write_method_comparison_csv(cmp_path, table, ["A", "B", COMBINED], ["m1-a", "m2"])
    lines = cmp_path.read_text().splitlines()
    assert lines[0] == "target,m1-a_r2,m1-a_rmse,m2_r2,m2_rmse"
    assert lines[1].split(",")[0] == "A"
    assert "NA" in lines[2]  # m1-a has no B entry
