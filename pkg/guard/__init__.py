"""
guard: robust dataset distillation with curvature regularization
"""
__version__ = '0.1.0'
