"""Full-cover raster prediction from fitted ensembles.

Every valid pixel is treated as one prediction row: its raw covariate values
are expanded into the ensemble's term columns, each member model replays its
own training standardization, and the members are averaged with the
ensemble weights — the same code path as point prediction, so a pixel whose
covariates equal a point's covariates gets exactly the point's prediction.

Output nodata is the union of the input nodata masks over the covariates the
ensemble actually reads (unused rasters do not propagate nodata), plus the
site raster's mask when the prediction is site-specific.
"""

import numpy as np

from .ensemble import model_average
from .errors import DataError
from .terms import RawDesign, evaluate_term

__all__ = ["predict_raster", "predict_raster_two_stage", "sites_from_raster"]


def _reference_grid(rasters, site_grid):
    for name in sorted(rasters):
        return rasters[name]
    if site_grid is not None:
        return site_grid
    raise DataError("at least one raster is required to define the output grid")


def _check_registration(rasters, site_grid, ref):
    for name in sorted(rasters):
        if not rasters[name].same_grid(ref):
            raise DataError(f"raster {name!r} is not co-registered with the others")
    if site_grid is not None and not site_grid.same_grid(ref):
        raise DataError("site raster is not co-registered with the covariate rasters")


def sites_from_raster(site_grid, site_codes):
    """Per-pixel site names (object array) from a coded site raster.

    ``site_codes`` maps raster cell value to site name. Nodata cells map to
    None; any other unmapped value is an error.
    """
    flat = site_grid.values.ravel()
    nodata = site_grid.nodata_mask().ravel()
    out = np.full(flat.size, None, dtype=object)
    codes = {float(k): v for k, v in site_codes.items()}
    for value in np.unique(flat[~nodata]):
        name = codes.get(float(value))
        if name is None:
            raise DataError(f"site raster value {value!r} has no site mapping")
        out[flat == value] = name
    out[nodata] = None
    return out


def _term_rows(terms, cov_map, row_sites, active_ids):
    """Raw design rows for pixels; inactive terms without rasters are zero."""
    n = len(row_sites)
    values = np.zeros((n, len(terms)))
    for j, term in enumerate(terms):
        if any(name not in cov_map for name in term.covariates):
            if term.term_id in active_ids:
                missing = [c for c in term.covariates if c not in cov_map][0]
                raise DataError(f"missing covariate raster {missing!r}")
            continue
        col = evaluate_term(term, cov_map)
        if term.scope is None:
            values[:, j] = col
        else:
            mask = row_sites == term.scope
            values[mask, j] = col[mask]
    return values


def predict_raster(ensemble, rasters, site=None, site_grid=None, site_codes=None):
    """Model-averaged prediction raster for one ensemble.

    ``rasters`` maps covariate name to a co-registered RasterGrid. Site
    identity (needed only when the ensemble carries site-scoped terms, or by
    a caller routing two-stage predictions) comes either from ``site`` (one
    name for every pixel) or from ``site_grid`` + ``site_codes``.
    """
    ref = _reference_grid(rasters, site_grid)
    _check_registration(rasters, site_grid, ref)
    needed = ensemble.needed_covariates()
    missing = [name for name in needed if name not in rasters]
    if missing:
        raise DataError(f"missing covariate raster {missing[0]!r}")
    npix = ref.nrows * ref.ncols
    bad = np.zeros(npix, dtype=bool)
    for name in needed:
        bad |= rasters[name].nodata_mask().ravel()

    if site is not None and site_grid is not None:
        raise DataError("give either a constant site or a site raster, not both")
    row_sites = np.full(npix, "", dtype=object)
    if site is not None:
        row_sites[:] = site
    elif site_grid is not None:
        if site_codes is None:
            raise DataError("a site raster needs site_codes to name its values")
        named = sites_from_raster(site_grid, site_codes)
        bad |= np.array([s is None for s in named], dtype=bool)
        row_sites = named
    elif ensemble.needs_site_information():
        raise DataError(
            "this ensemble has site-scoped terms; pass site= or site_grid="
        )

    valid = np.flatnonzero(~bad)
    out = np.full(npix, ref.nodata)
    if valid.size:
        cov_map = {
            name: grid.values.ravel()[valid]
            for name, grid in rasters.items()
        }
        active = {cid for model in ensemble.models for cid in model.coef}
        rows = _term_rows(ensemble.terms, cov_map, row_sites[valid], active)
        design = RawDesign(rows, list(ensemble.terms), row_sites[valid])
        out[valid] = model_average(ensemble, design)
    return ref.with_values(out.reshape(ref.nrows, ref.ncols))


def predict_raster_two_stage(
    stage1_ensemble, stage2_by_site, rasters, site_grid, site_codes
):
    """Prediction raster for a base ensemble plus per-site residual stages.

    Each pixel gets stage1 + the stage-2 ensemble of its site; pixels whose
    site is unknown (site-raster nodata) are nodata.
    """
    ref = _reference_grid(rasters, site_grid)
    base = predict_raster(stage1_ensemble, rasters, site_grid=site_grid, site_codes=site_codes)
    named = sites_from_raster(site_grid, site_codes)
    flat = base.values.ravel().copy()
    base_bad = base.nodata_mask().ravel()
    covered = np.zeros(flat.size, dtype=bool)
    for site_name in sorted(stage2_by_site):
        mask = np.array([s == site_name for s in named], dtype=bool) & ~base_bad
        if not mask.any():
            continue
        stage2 = predict_raster(
            stage2_by_site[site_name], rasters, site=site_name
        )
        stage2_flat = stage2.values.ravel()
        stage2_bad = stage2.nodata_mask().ravel()
        good = mask & ~stage2_bad
        flat[good] = flat[good] + stage2_flat[good]
        covered |= good
    flat[~covered] = ref.nodata
    return ref.with_values(flat.reshape(ref.nrows, ref.ncols))
