import pandas as pd
from tqdm import tqdm
from guard.tensors import Rng
from guard.curvature.hessian import lambda1_power, power_iteration, _flat_operator


class CurvatureProfile:
    """
    Top-k input-Hessian eigenvalues per sample, sorted descending

    Attributes:
        table: (pd.DataFrame) columns sample_id, rank, eigenvalue, residual, converged
        k:     (int) eigenvalues per sample
        tol:   (float) residual tolerance used for acceptance
        iters: (int) iteration budget per eigenvalue
    """
    columns = ['sample_id', 'rank', 'eigenvalue', 'residual', 'converged']

    def __init__(self, rows, k, tol, iters):
        self.table = pd.DataFrame(rows, columns=self.columns)
        self.k = k
        self.tol = tol
        self.iters = iters

    def eigenvalues(self, sample_id):
        rows = self.table.loc[self.table['sample_id'] == sample_id]
        return list(rows.sort_values('rank')['eigenvalue'])

    def lambda1(self):
        """
        :return: (pd.Series) top eigenvalue per sample id
        """
        top = self.table.loc[self.table['rank'] == 1]
        return top.set_index('sample_id')['eigenvalue']

    def median_lambda1(self):
        return float(self.lambda1().median())

    @property
    def converged_fraction(self):
        return float(self.table['converged'].mean()) if len(self.table) else 1.0

    def to_csv(self, path):
        self.table.to_csv(path, index=False, float_format='%.17g')


def profile(model, x, y, k=1, iters=200, tol=1e-4, h=1e-4, rng=None, sample_ids=None, verbose=False):
    """
    Top-k eigenvalues of the input Hessian for every sample, by shifted power
    iteration on the complement of the eigenvectors already found
    :param model: Model or Surface
    :param x: (torch.Tensor) (N, ...) samples
    :param y: labels of the samples
    :param k: (int) eigenvalues per sample, at most the input dimension
    :param iters: (int) iteration budget per eigenvalue
    :param tol: (float) relative residual tolerance
    :param h: (float) finite-difference step
    :param rng: (Rng) random stream
    :param sample_ids: (list) identifiers written to the table (defaults to 0..N-1)
    :param verbose: (bool) progress bar
    :return: (CurvatureProfile)
    """
    dimension = x[0].numel()
    assert 1 <= k <= dimension, 'k must be between 1 and the input dimension %d' % dimension
    rng = rng if rng is not None else Rng(0)
    sample_ids = list(range(x.shape[0])) if sample_ids is None else list(sample_ids)
    rows = []
    for i in tqdm(range(x.shape[0]), disable=not verbose):
        x_i, y_i = x[i:i + 1], y[i:i + 1]
        sample_rng = rng.spawn('sample', sample_ids[i])
        first = lambda1_power(model, x_i, y_i, iters=iters, tol=tol, rng=sample_rng, h=h)
        estimates = [first]
        if k > 1:
            apply = _flat_operator(model, x_i, y_i, h)
            basis = [first.vector] if float(first.vector.norm()) > 0 else []
            with model.evaluating():
                for _ in range(k - 1):
                    estimate = power_iteration(apply, sample_rng.normal(dimension), iters, tol,
                                               shift=first.radius, basis=basis)
                    estimates.append(estimate)
                    if float(estimate.vector.norm()) > 0:
                        basis.append(estimate.vector)
        estimates.sort(key=lambda e: -e.value)
        for rank, estimate in enumerate(estimates, start=1):
            rows.append([sample_ids[i], rank, estimate.value, estimate.residual, bool(estimate.converged)])
    return CurvatureProfile(rows, k, tol, iters)
