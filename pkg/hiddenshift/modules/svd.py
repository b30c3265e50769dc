#    hiddenshift - graph structure attack laboratory
#    Licensed under the GNU AGPLv3
#    https://www.gnu.org/licenses/agpl-3.0.html

import logging

from .. import loader, validators
from ..baselines import svd_defense

logger = logging.getLogger(__name__)


class SvdMod(loader.Defense):
    """Replaces the adjacency with a low-rank reconstruction"""

    strings = {"name": "svd"}

    def __init__(self):
        self.config = loader.ModuleConfig(
            loader.ConfigValue(
                "defense.svd_rank",
                15,
                "Rank of the reconstruction",
                validator=validators.Integer(minimum=1),
            ),
            loader.ConfigValue(
                "defense.binarize_svd",
                False,
                "Round the reconstruction back to a binary adjacency",
                validator=validators.Boolean(),
            ),
        )

    def config_complete(self):
        logger.debug(f"SVD defense at rank {self.config['defense.svd_rank']}")

    def apply(self, graph):
        return svd_defense(
            graph,
            self.config["defense.svd_rank"],
            self.config["defense.binarize_svd"],
        )
