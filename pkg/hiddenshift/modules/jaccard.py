#    hiddenshift - graph structure attack laboratory
#    Licensed under the GNU AGPLv3
#    https://www.gnu.org/licenses/agpl-3.0.html

from .. import loader, validators
from ..baselines import jaccard_defense


class JaccardMod(loader.Defense):
    """Prunes edges between nodes with dissimilar features"""

    strings = {"name": "jaccard"}

    def __init__(self):
        self.config = loader.ModuleConfig(
            loader.ConfigValue(
                "defense.jaccard_threshold",
                0.01,
                "Edges with endpoint similarity below this are removed",
                validator=validators.Float(minimum=0, maximum=1),
            ),
        )

    def apply(self, graph):
        return jaccard_defense(graph, self.config["defense.jaccard_threshold"])
