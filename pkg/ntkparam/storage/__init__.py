from ntkparam.storage.journal import Journal, JournalStats
from ntkparam.storage.kernel_file import load_kernel, save_kernel

__all__ = ["Journal", "JournalStats", "load_kernel", "save_kernel"]
