import zlib
import numpy as np
import torch
from guard.tensors.tensor import DTYPE


class Rng:
    """
    Counter-based random stream: a (seed, stream) pair determines the whole
    sequence of draws. Child streams are derived with spawn(), so independent
    consumers never share state.

    Attributes:
        seed:      (int) 64-bit seed
        stream:    (tuple) stream identifier path
        generator: (torch.Generator) CPU generator seeded from (seed, stream)
    """
    def __init__(self, seed=0, stream=()):
        """
        Constructor for Rng
        :param seed: (int) 64-bit seed
        :param stream: (tuple|str|int) stream identifier
        """
        if not isinstance(stream, tuple):
            stream = (stream,)
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream = stream
        entropy = [self.seed & 0xFFFFFFFF, self.seed >> 32] + [self._word(s) for s in stream]
        state = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint32)
        self.generator = torch.Generator()
        self.generator.manual_seed((int(state[0]) << 31) ^ int(state[1]))

    @staticmethod
    def _word(item):
        if isinstance(item, int):
            return item & 0xFFFFFFFF
        return zlib.crc32(str(item).encode('utf-8'))

    def spawn(self, *stream):
        """
        Derives an independent child stream
        :param stream: identifiers appended to this stream's path
        :return: (Rng) child stream
        """
        return Rng(self.seed, self.stream + tuple(stream))

    def normal(self, *shape):
        return torch.randn(*shape, generator=self.generator, dtype=DTYPE)

    def uniform(self, *shape, low=0.0, high=1.0):
        return low + (high - low) * torch.rand(*shape, generator=self.generator, dtype=DTYPE)

    def randint(self, high, size):
        return torch.randint(high, tuple(size), generator=self.generator)

    def permutation(self, n):
        return torch.randperm(n, generator=self.generator)

    def choice(self, population, k):
        """
        Draws k distinct entries of a 1-d index tensor
        """
        order = self.permutation(len(population))[:k]
        return population[order]

    def signs(self, *shape):
        return 2.0 * torch.randint(2, shape, generator=self.generator).to(DTYPE) - 1.0

    def __repr__(self):
        return 'Rng(seed=%d, stream=%s)' % (self.seed, self.stream)
