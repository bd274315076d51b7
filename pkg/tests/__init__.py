# Tests para cbf-embudo
