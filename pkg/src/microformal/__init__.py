"""Thick (microformal) morphisms of supermanifolds over exact rationals."""
