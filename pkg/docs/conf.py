import datetime as dt
import sys
import os

sys.path.insert(0, os.path.abspath(".."))
import amrc  # noqa: 402

# -- General configuration -----------------------------------------------------

extensions = ["sphinx.ext.autodoc"]

templates_path = ["_templates"]

source_suffix = ".rst"
master_doc = "index"

project = "amrc"
copyright = "{:%Y}, amrc contributors".format(dt.datetime.utcnow())

version = release = amrc.__version__

exclude_patterns = ["_build"]

html_theme = "alabaster"

html_sidebars = {"**": ["about.html", "localtoc.html", "searchbox.html"]}
