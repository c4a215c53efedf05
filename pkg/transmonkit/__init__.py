from .__version__ import version
