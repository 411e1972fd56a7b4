"""Checks of the Bochner and Weitzenboeck identities and of the gradient-flow splitting."""
