import os
import sys

module_dir = os.environ.get("ENCSIM_MODULE_DIR")
if module_dir and module_dir not in sys.path:
    sys.path.insert(0, module_dir)
