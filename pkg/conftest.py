import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

# Keep test runs from filling ./log
os.environ.setdefault("CLOCKTRANSITION_LOG_DIR", tempfile.mkdtemp(prefix="clocktransition-log-"))
