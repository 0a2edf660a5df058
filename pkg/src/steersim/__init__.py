"""steersim: steering-controller training and masked-feature analysis
on a procedurally generated driving world."""

__version__ = "0.1.0"
