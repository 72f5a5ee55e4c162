"""xlsim: link-level simulation of mid-band XL-MIMO TDD multiuser OFDM.

Submodules mirror the processing chain: ``numerology`` (frame/slot grid),
``channel`` (near-field non-stationary generation), ``ofdm``
(modulation), ``sync`` (PSS timing), ``chanest`` (comb pilots + LS),
``mimo`` (linear detection/precoding), ``distributed`` (sharded
baseband dataflow), ``metrics`` (EVM/SER, spread, rate formulas) and
``linksim`` (end-to-end scenarios and sweeps).
"""

from . import (  # noqa: F401
    binio,
    chanest,
    channel,
    distributed,
    errors,
    linksim,
    metrics,
    mimo,
    numerology,
    ofdm,
    sync,
)

__version__ = "0.1.0"
