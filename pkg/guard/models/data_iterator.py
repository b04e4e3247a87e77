class DataIterator:
    """
    Iterates over matching chunks of n rows of two tensors (inputs and labels),
    in the order given by an optional permutation
    """
    def __init__(self, data1, data2, n, order=None):
        assert data1.shape[0] == data2.shape[0], 'Inputs and labels must have the same length'
        assert n >= 1, 'Batch size must be at least 1'
        self.data1 = data1
        self.data2 = data2
        self.n = n
        self.order = order
        self.first_index = 0

    def __iter__(self):
        return self

    def __len__(self):
        return (self.data1.shape[0] + self.n - 1) // self.n

    def __next__(self):
        if self.first_index >= self.data1.shape[0]:
            raise StopIteration
        last_index = min(self.first_index + self.n, self.data1.shape[0])
        if self.order is None:
            chunk1 = self.data1[self.first_index:last_index]
            chunk2 = self.data2[self.first_index:last_index]
        else:
            indices = self.order[self.first_index:last_index]
            chunk1 = self.data1[indices]
            chunk2 = self.data2[indices]
        self.first_index = last_index
        return chunk1, chunk2
