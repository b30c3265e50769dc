#    hiddenshift - graph structure attack laboratory
#    Licensed under the GNU AGPLv3
#    https://www.gnu.org/licenses/agpl-3.0.html

import numpy as np

from .. import loader


class IdentityMod(loader.Attack):
    """Leaves the graph as it is, the clean reference row of every grid"""

    strings = {"name": "identity"}
    needs_surrogate = False

    def attack(self, graph, budget, context):
        return loader.AttackResult(np.array(graph.adjacency), self.name, 0)
