"""File formats: network JSON and kernel CSV dumps."""
import json

import numpy as np

from .dpp import Role, SymmetricKernel
from .errors import InvalidArgument
from .geometry import Network, network_from_dict, network_to_dict


def dump_network(net: Network) -> str:
    return json.dumps(network_to_dict(net), indent=2) + "\n"


def save_network(net: Network, path):
    with open(path, "w") as fh:
        fh.write(dump_network(net))


def load_network(path) -> Network:
    with open(path) as fh:
        return network_from_dict(json.load(fh))


def write_kernel_csv(fh, kernel: SymmetricKernel):
    fh.write(f"# role={kernel.role.value} n={kernel.n}\n")
    for row in kernel.matrix:
        fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def save_kernel(kernel: SymmetricKernel, path):
    with open(path, "w") as fh:
        write_kernel_csv(fh, kernel)


def load_kernel(path) -> SymmetricKernel:
    with open(path) as fh:
        header = fh.readline().strip()
        rows = [line for line in fh if line.strip()]
    if not header.startswith("#"):
        raise InvalidArgument("kernel file must start with '# role=<K|L|S> n=<n>'")
    fields = dict(tok.split("=", 1) for tok in header.lstrip("#").split() if "=" in tok)
    try:
        role = Role(fields["role"])
        n = int(fields["n"])
    except (KeyError, ValueError) as exc:
        raise InvalidArgument(f"bad kernel header {header!r}") from exc
    data = np.array([[float(v) for v in line.split(",")] for line in rows]).reshape(-1, n) if n else np.zeros((0, 0))
    if data.shape != (n, n):
        raise InvalidArgument(f"kernel file declares n={n} but holds a {data.shape} matrix")
    return SymmetricKernel.create(data, role)
