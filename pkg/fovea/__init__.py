"""
fovea: recurrent foveated-glimpse attention classifier.
"""

VERSION = "0.4.0"
