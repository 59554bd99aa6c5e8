# Test package for rustcrack
