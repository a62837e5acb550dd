"""Dataset generation, training, ablation and rendering."""
