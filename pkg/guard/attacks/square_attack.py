import math
import torch
from guard.attacks.attack import Attack
from guard.attacks.utils import project, margins

# fraction of queries (out of 10000) after which the square size is halved again
P_SCHEDULE = [(10, 1), (50, 2), (200, 4), (500, 8), (1000, 16), (2000, 32), (4000, 64), (6000, 128),
              (8000, 256), (10000, 512)]


def square_fraction(p_init, iteration, total):
    progress = int(iteration / total * 10000)
    for bound, divisor in P_SCHEDULE:
        if progress <= bound:
            return p_init / divisor
    return p_init / 512


class SquareAttack(Attack):
    """
    Score-based random search: each query overwrites one axis-aligned square
    patch with random signs (a vertex of the eps-box under linf, scaled to the
    remaining budget under l2) and keeps it if the margin drops.
    Only model outputs are used. Flat inputs are treated as 1 x d images.
    """
    nickname = 'square'

    @staticmethod
    def _as_image(t):
        if t.dim() == 4:
            return t
        if t.dim() == 3:
            return t.unsqueeze(1)
        return t.reshape(t.shape[0], 1, 1, -1)

    def _window(self, p, height, width):
        area = max(1.0, p * height * width)
        side_h = min(height, max(1, int(round(math.sqrt(area)))))
        side_w = min(width, max(1, int(round(area / side_h))))
        return side_h, side_w

    def _patch(self, current, clean, window, unit):
        """
        Perturbation written into one window: the eps-box vertex under linf; under l2 the
        signs are scaled to spend whatever budget the rest of the perturbation leaves
        """
        eps = self.spec.eps
        if self.spec.norm == 'linf':
            return eps * unit
        delta = current - clean
        delta[window] = 0.0
        budget = math.sqrt(max(eps ** 2 - float((delta ** 2).sum()), 0.0))
        size = delta[window].numel()
        return budget / math.sqrt(size) * unit

    def run(self, model, x, y, rng):
        eps = self.spec.eps
        image = self._as_image(x)
        batch, channels, height, width = image.shape
        stripes = rng.signs(batch, channels, 1, width)
        scale = eps if self.spec.norm == 'linf' else eps / math.sqrt(channels * height * width)
        x_adv = project((image + scale * stripes).reshape(x.shape), x, self.spec)
        with torch.no_grad():
            margin = margins(model, x_adv, y)
            for i in range(self.spec.queries):
                active = torch.nonzero(margin > 0).reshape(-1)
                if active.numel() == 0:
                    break
                side_h, side_w = self._window(square_fraction(self.spec.p_init, i, self.spec.queries), height, width)
                candidate = self._as_image(x_adv).clone()
                rows = rng.randint(height - side_h + 1, (active.numel(),))
                cols = rng.randint(width - side_w + 1, (active.numel(),))
                units = rng.signs(active.numel(), channels, 1, 1)
                for j, b in enumerate(active.tolist()):
                    r, c = int(rows[j]), int(cols[j])
                    window = (slice(None), slice(r, r + side_h), slice(c, c + side_w))
                    patch = self._patch(candidate[b], image[b], window, units[j])
                    candidate[b][window] = image[b][window] + patch
                candidate = project(candidate.reshape(x.shape), x, self.spec)
                new_margin = margins(model, candidate[active], y[active])
                accepted = new_margin < margin[active]
                chosen = active[accepted]
                x_adv[chosen] = candidate[chosen]
                margin[chosen] = new_margin[accepted]
        return x_adv
