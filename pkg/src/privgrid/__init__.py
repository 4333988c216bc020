"""Privacy-preserving electricity theft detection over a simulated ledger.

Subpackage map:

* :mod:`privgrid.curve`      -- group arithmetic and the symmetric pairing
* :mod:`privgrid.crypto`     -- system parameters, hashing, fixed-point codec
* :mod:`privgrid.secureagg`  -- pairwise-mask key agreement, DA aggregation
* :mod:`privgrid.funcenc`    -- inner-product functional encryption + BSGS
* :mod:`privgrid.bls`        -- short signatures, single and batch verify
* :mod:`privgrid.ledger`     -- Merkle tree, blocks, consensus simulation
* :mod:`privgrid.gridsim`    -- datasets, attacks, judgement, scenario engine
* :mod:`privgrid.detector`   -- LSTM inference, private first layer, metrics
* :mod:`privgrid.cli`        -- operator command line
"""

from .crypto import FixedPointCodec, SystemParams, system_params

__all__ = ["FixedPointCodec", "SystemParams", "system_params"]
__version__ = "0.1.0"
