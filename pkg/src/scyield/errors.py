"""Domain exceptions shared across the pipeline."""


class UnencodableChipError(Exception):
    """The chip's faulty data qubits cut every logical operator of one kind."""


class UncoverableStabilizerError(Exception):
    """Some data qubit of a stabilizer has no reachable working ancilla."""
