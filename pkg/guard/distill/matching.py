"""
Distances between two parameter-gradient lists
"""
import torch

NORM_FLOOR = 1e-12


def layer_distances(gS, gT, kind='layerwise-cosine'):
    """
    Per-layer terms of the matching distance
    :param gS: (list[torch.Tensor]) synthetic-data gradients, one per parameter tensor
    :param gT: (list[torch.Tensor]) real-data gradients with the same grouping
    :param kind: (str) 'layerwise-cosine' or 'euclidean'
    :return: (list[torch.Tensor], list[int]) per-layer terms and the indices of degenerate
        (zero-norm) layers, which contribute 1 under the cosine distance
    """
    assert kind in ['layerwise-cosine', 'euclidean'], 'kind must be \'layerwise-cosine\' or \'euclidean\''
    if len(gS) != len(gT):
        raise ValueError('Gradient lists differ in length: %d vs %d' % (len(gS), len(gT)))
    for a, b in zip(gS, gT):
        if a.shape != b.shape:
            raise ValueError('Gradient shapes differ: %s vs %s' % (tuple(a.shape), tuple(b.shape)))
    if kind == 'euclidean':
        return [((a - b) ** 2).sum() for a, b in zip(gS, gT)], []
    terms, degenerate = [], []
    for i, (a, b) in enumerate(zip(gS, gT)):
        a, b = a.flatten(), b.flatten()
        norm_a, norm_b = torch.linalg.vector_norm(a), torch.linalg.vector_norm(b)
        if float(norm_a) < NORM_FLOOR or float(norm_b) < NORM_FLOOR:
            terms.append(torch.ones((), dtype=a.dtype))
            degenerate.append(i)
        else:
            terms.append(1.0 - torch.dot(a, b) / (norm_a * norm_b))
    return terms, degenerate


def matching_distance(gS, gT, kind='layerwise-cosine'):
    """
    layerwise-cosine: sum over layers of 1 - cos(gS_l, gT_l)
    euclidean: ||gS - gT||_2 over the concatenation of all layers
    :return: (torch.Tensor) 0-d distance, differentiable through gS (and gT)
    """
    terms, _ = layer_distances(gS, gT, kind)
    if kind == 'euclidean':
        # zero subgradient where gS = gT
        return torch.linalg.vector_norm(torch.cat([(a - b).flatten() for a, b in zip(gS, gT)]))
    return torch.stack(terms).sum()
