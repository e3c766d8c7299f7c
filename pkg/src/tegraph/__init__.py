"""Transportation-entropy identification of non-causal graphical models."""
