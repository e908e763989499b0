import os
import sys

from dotenv import load_dotenv

load_dotenv()

# BLAS pools read these once, so they must be set before numpy is imported
_threads = os.environ.get("FEEC_MHD_THREADS")
if _threads:
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, _threads)

from src.cli import cli_main  # noqa: E402

if __name__ == "__main__":
    sys.exit(cli_main())
