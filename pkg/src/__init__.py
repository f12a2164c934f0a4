"""congrua package."""
