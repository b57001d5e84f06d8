"""Tree decompositions: validation, bag merging, binarization, post-ordering.

A decomposition stores bags (vertex sets over 0..n-1) and a rooted tree
over bag ids.  Normalization re-roots at bag 0, merges bags until the
per-bag eliminated-vertex sets reach the target size, makes the tree
full binary by inserting copy bags, and derives the elimination
post-ordering: a DFS post-order over bags emitting, per bag, the
vertices whose highest containing bag it is, with the intra-bag order
following the four membership classes against the two children.

File format (PACE 2017 style): header "s td <bags> <width+1> <n>",
bag lines "b <id> <v...>", one "<id> <id>" line per tree edge,
comment lines starting with "c"; ids are 1-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .dense import Permutation
from .fields import ParseError


@dataclass
class TreeDecomposition:
    n: int
    bags: list  # list of frozenset of vertex ids
    parent: list  # parent bag id, -1 for the root
    children: list  # list of child-id lists
    root: int = 0

    @classmethod
    def build(cls, n, bags, edges, root=0):
        """From undirected tree edges over bag ids; re-roots at `root`."""
        bags = [frozenset(b) for b in bags]
        k = len(bags)
        adj = [[] for _ in range(k)]
        for u, v in edges:
            adj[u].append(v)
            adj[v].append(u)
        parent = [-1] * k
        children = [[] for _ in range(k)]
        seen = [False] * k
        stack = [root]
        seen[root] = True
        order = []
        while stack:
            u = stack.pop()
            order.append(u)
            for v in sorted(adj[u]):
                if not seen[v]:
                    seen[v] = True
                    parent[v] = u
                    children[u].append(v)
                    stack.append(v)
        if not all(seen) and k > 0:
            raise ParseError("bag tree is not connected")
        return cls(n, bags, parent, children, root)

    @property
    def nbags(self) -> int:
        return len(self.bags)

    def max_bag(self) -> int:
        return max((len(b) for b in self.bags), default=0)

    def width(self) -> int:
        return self.max_bag() - 1

    def depths(self):
        d = [0] * self.nbags
        stack = [self.root]
        while stack:
            u = stack.pop()
            for v in self.children[u]:
                d[v] = d[u] + 1
                stack.append(v)
        return d

    def postorder_bags(self):
        out = []
        stack = [(self.root, False)]
        while stack:
            u, done = stack.pop()
            if done:
                out.append(u)
            else:
                stack.append((u, True))
                for v in reversed(self.children[u]):
                    stack.append((v, False))
        return out


@dataclass
class TDReport:
    ok: bool
    violations: list = field(default_factory=list)


def validate_td(td: TreeDecomposition, pattern) -> TDReport:
    """Check the three decomposition properties against a sparsity pattern.

    `pattern` is an iterable of (u, v) off-diagonal nonzero positions.
    Returns a structured report; never raises.
    """
    violations = []
    covered = set()
    for b in td.bags:
        covered |= b
    for v in range(td.n):
        if v not in covered:
            violations.append(("vertex-uncovered", v))
            break
    # connectivity of the bag set of each vertex
    for v in range(td.n):
        holding = [i for i, b in enumerate(td.bags) if v in b]
        if not holding:
            continue
        hold = set(holding)
        seen = {holding[0]}
        stack = [holding[0]]
        while stack:
            u = stack.pop()
            for w in td.children[u] + [td.parent[u]]:
                if w >= 0 and w in hold and w not in seen:
                    seen.add(w)
                    stack.append(w)
        if seen != hold:
            violations.append(("vertex-bags-disconnected", v, sorted(hold - seen)))
            break
    for u, v in pattern:
        if u == v:
            continue
        if not any(u in b and v in b for b in td.bags):
            violations.append(("edge-uncovered", (u, v)))
            break
    return TDReport(not violations, violations)


def _rho_sets(td: TreeDecomposition):
    """Per-bag sets of vertices whose highest containing bag it is."""
    depths = td.depths()
    holding = [[] for _ in range(td.n)]
    for i, b in enumerate(td.bags):
        for v in b:
            holding[v].append(i)
    rho = [set() for _ in range(td.nbags)]
    root_bag = [-1] * td.n
    for v in range(td.n):
        if not holding[v]:
            raise ParseError(f"vertex {v} appears in no bag")
        best = min(holding[v], key=lambda i: depths[i])
        ties = [i for i in holding[v] if depths[i] == depths[best]]
        assert len(ties) == 1, "connectivity forces a unique highest bag"
        rho[best].add(v)
        root_bag[v] = best
    return rho, root_bag


def merge_bags(td: TreeDecomposition, tau: int) -> TreeDecomposition:
    """Merge bags bottom-up until eliminated-set sizes reach the target.

    Step 1 roots the tree (bag 0); step 2 merges sibling pairs while the
    combined eliminated-set size stays below tau (bag growth capped at
    2*tau); step 3 merges children into parents under the same threshold
    (growth capped at 3*tau).
    """
    bags = [set(b) for b in td.bags]
    parent = list(td.parent)
    children = [list(c) for c in td.children]
    rho, _ = _rho_sets(td)
    alive = [True] * len(bags)

    def absorb(dst, src):
        bags[dst] |= bags[src]
        rho[dst] |= rho[src]
        for c in children[src]:
            parent[c] = dst
        children[dst].extend(children[src])
        alive[src] = False

    # step 2: sibling merges, leaves up, left to right
    depths = td.depths()
    for u in sorted(range(len(bags)), key=lambda i: -depths[i]):
        if not alive[u]:
            continue
        kids = [c for c in children[u] if alive[c]]
        i = 0
        while i + 1 < len(kids):
            a, b = kids[i], kids[i + 1]
            if (
                len(rho[a]) + len(rho[b]) < tau
                and len(bags[a] | bags[b]) <= 2 * tau
            ):
                absorb(a, b)
                children[u].remove(b)
                kids = [c for c in children[u] if alive[c]]
            else:
                i += 1
    # step 3: child-into-parent merges, post-order scan
    order = [u for u in td.postorder_bags() if alive[u]]
    for u in order:
        if not alive[u] or parent[u] < 0:
            continue
        p = parent[u]
        while not alive[p]:
            p = parent[p]
        if len(rho[u]) + len(rho[p]) < tau and len(bags[u] | bags[p]) <= 3 * tau:
            absorb(p, u)
            children[p].remove(u)

    keep = [i for i in range(len(bags)) if alive[i]]
    remap = {old: new for new, old in enumerate(keep)}
    new_bags = [frozenset(bags[i]) for i in keep]
    new_parent = [remap[parent[i]] if parent[i] >= 0 else -1 for i in keep]
    new_children = [[remap[c] for c in children[i] if alive[c]] for i in keep]
    return TreeDecomposition(td.n, new_bags, new_parent, new_children, remap[td.root])


def binarize(td: TreeDecomposition) -> TreeDecomposition:
    """Insert copy bags so every internal node has exactly two children."""
    bags = [frozenset(b) for b in td.bags]
    parent = list(td.parent)
    children = [list(c) for c in td.children]

    def new_bag(content, par):
        bags.append(frozenset(content))
        parent.append(par)
        children.append([])
        return len(bags) - 1

    stack = [td.root]
    while stack:
        u = stack.pop()
        kids = children[u]
        if len(kids) == 1:
            # duplicate the node's own bag as a second (leaf) child
            c = new_bag(bags[u], u)
            children[u] = [kids[0], c]
        elif len(kids) > 2:
            # left comb of copy bags
            first, rest = kids[0], kids[1:]
            carrier = new_bag(bags[u], u)
            children[u] = [first, carrier]
            cur = carrier
            while len(rest) > 2:
                nxt = new_bag(bags[u], cur)
                children[cur] = [rest[0], nxt]
                parent[rest[0]] = cur
                rest = rest[1:]
                cur = nxt
            children[cur] = list(rest)
            for c in rest:
                parent[c] = cur
        stack.extend(children[u])
    return TreeDecomposition(td.n, bags, parent, children, td.root)


@dataclass
class NormalizedTD:
    td: TreeDecomposition  # full binary
    rho: list  # per-bag eliminated vertex sets
    order: Permutation  # position -> original vertex id
    tau: int  # merge target (input max bag size unless overridden)

    @property
    def n(self) -> int:
        return self.td.n

    def position(self):
        return self.order.inv  # original vertex id -> position


def post_order(td: TreeDecomposition, rho) -> Permutation:
    """Elimination order: DFS post-order over bags emitting each bag's
    eliminated set, ordered inside internal bags by the four membership
    classes against the children (ties by vertex index)."""
    out = []
    for u in td.postorder_bags():
        kids = td.children[u]
        vs = rho[u]
        if len(kids) == 2:
            y, z = td.bags[kids[0]], td.bags[kids[1]]
            cls = {}
            for v in vs:
                in_y, in_z = v in y, v in z
                cls[v] = 0 if in_y and not in_z else 1 if in_y and in_z else 2 if in_z else 3
            out.extend(sorted(vs, key=lambda v: (cls[v], v)))
        else:
            out.extend(sorted(vs))
    return Permutation(out)


def normalize_td(td: TreeDecomposition, tau: int | None = None) -> NormalizedTD:
    """Root at bag 0, merge, binarize, and derive the post-ordering."""
    if tau is None:
        tau = td.max_bag()
    merged = merge_bags(td, tau)
    binary = binarize(merged)
    rho, _ = _rho_sets(binary)
    order = post_order(binary, rho)
    return NormalizedTD(binary, rho, order, tau)


# -- PACE 2017 I/O ------------------------------------------------------------


def read_td(path) -> TreeDecomposition:
    bags = None
    edges = []
    nbags = n = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("c"):
                continue
            parts = line.split()
            if parts[0] == "s":
                if len(parts) != 5 or parts[1] != "td":
                    raise ParseError(f"line {lineno}: bad header")
                try:
                    nbags, _, n = int(parts[2]), int(parts[3]), int(parts[4])
                except ValueError:
                    raise ParseError(f"line {lineno}: bad header numbers") from None
                bags = [frozenset()] * nbags
            elif parts[0] == "b":
                if bags is None:
                    raise ParseError(f"line {lineno}: bag before header")
                try:
                    bid = int(parts[1])
                    vs = [int(v) for v in parts[2:]]
                except ValueError:
                    raise ParseError(f"line {lineno}: bad bag line") from None
                if not 1 <= bid <= nbags:
                    raise ParseError(f"line {lineno}: bag id {bid} out of range")
                if any(not 1 <= v <= n for v in vs):
                    raise ParseError(f"line {lineno}: vertex out of range")
                bags[bid - 1] = frozenset(v - 1 for v in vs)
            else:
                if bags is None:
                    raise ParseError(f"line {lineno}: edge before header")
                try:
                    u, v = int(parts[0]), int(parts[1])
                except (ValueError, IndexError):
                    raise ParseError(f"line {lineno}: bad edge line") from None
                if not (1 <= u <= nbags and 1 <= v <= nbags):
                    raise ParseError(f"line {lineno}: edge id out of range")
                edges.append((u - 1, v - 1))
    if bags is None:
        raise ParseError("missing 's td' header")
    if len(edges) != nbags - 1 and nbags > 0:
        raise ParseError(f"expected {nbags - 1} tree edges, found {len(edges)}")
    return TreeDecomposition.build(n, bags, edges, root=0)


def write_td(path, td: TreeDecomposition):
    with open(path, "w") as fh:
        fh.write(f"s td {td.nbags} {td.max_bag()} {td.n}\n")
        for i, b in enumerate(td.bags):
            fh.write("b " + " ".join([str(i + 1)] + [str(v + 1) for v in sorted(b)]) + "\n")
        for i, p in enumerate(td.parent):
            if p >= 0:
                fh.write(f"{p + 1} {i + 1}\n")


def greedy_td(n: int, pattern) -> TreeDecomposition:
    """Valid (not necessarily optimal) decomposition by min-degree elimination.

    Eliminating a vertex creates a bag of it and its current neighbors,
    turned into a clique; each bag hangs off the bag of the earliest
    eliminated vertex among those neighbors.
    """
    adj = [set() for _ in range(n)]
    for u, v in pattern:
        if u != v:
            adj[u].add(v)
            adj[v].add(u)
    alive = set(range(n))
    elim_pos = {}
    bag_of = {}
    bags = []
    edges = []
    while alive:
        v = min(alive, key=lambda u: (len(adj[u] & alive), u))
        nbrs = adj[v] & alive
        bags.append(frozenset({v} | nbrs))
        bag_of[v] = len(bags) - 1
        elim_pos[v] = len(bags) - 1
        for a in nbrs:
            for b in nbrs:
                if a != b:
                    adj[a].add(b)
        alive.remove(v)
    # connect each bag to the bag of the first-eliminated neighbor above it
    for v, bid in bag_of.items():
        nbrs = [u for u in bags[bid] if u != v]
        later = [u for u in nbrs if elim_pos[u] > elim_pos[v]]
        if later:
            u = min(later, key=lambda w: elim_pos[w])
            edges.append((bid, bag_of[u]))
    # stitch any disconnected components (no cross edges exist, so chaining
    # the component roots keeps all properties)
    k = len(bags)
    dsu = list(range(k))

    def find(x):
        while dsu[x] != x:
            dsu[x] = dsu[dsu[x]]
            x = dsu[x]
        return x

    for u, v in edges:
        dsu[find(u)] = find(v)
    roots = sorted({find(i) for i in range(k)})
    for a, b in zip(roots, roots[1:]):
        edges.append((a, b))
        dsu[find(a)] = find(b)
    if not bags:
        bags = [frozenset()]
    return TreeDecomposition.build(n, bags, edges, root=0)
