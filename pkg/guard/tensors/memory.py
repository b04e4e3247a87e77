import torch


class MemoryMeter:
    """
    High-water mark of the bytes autograd keeps alive for the backward pass
    Installs saved-tensor hooks, so every intermediate recorded for
    differentiation is counted when it is saved. Deterministic for a fixed
    computation, unlike allocator queries.

    Attributes:
        current: (int) bytes saved since the last reset
        peak:    (int) largest value current has reached
    """
    def __init__(self):
        self.current = 0
        self.peak = 0
        self._hooks = None

    def _pack(self, saved):
        self.current += saved.numel() * saved.element_size()
        self.peak = max(self.peak, self.current)
        return saved

    @staticmethod
    def _unpack(saved):
        return saved

    def reset(self):
        """
        Starts a new measurement window (call once per iteration)
        """
        self.current = 0

    def __enter__(self):
        self._hooks = torch.autograd.graph.saved_tensors_hooks(self._pack, self._unpack)
        self._hooks.__enter__()
        return self

    def __exit__(self, *exc):
        self._hooks.__exit__(*exc)
        return False

    @property
    def peak_mib(self):
        return self.peak / float(1 << 20)
